#include "equinav/eqf.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "equinav/integrator.hpp"

namespace equinav::eqf {
namespace {

void symmetrize(MatX& p) { p = 0.5 * (p + p.transpose()).eval(); }

sym::GroupElement integrate_lifted(const FilterState& fs, const InputSegment& u, double dt) {
  const std::size_t n = fs.num_sensors();
  const NavState origin = NavState::origin(n);
  const Vec3& g = fs.cfg.gravity;
  if (fs.opts.scheme == PropagationScheme::kFirstOrder) {
    const sym::GroupTangent lam = sym::lift(sym::act(fs.X, origin), u.start, g);
    return sym::compose(fs.X, sym::exp(lam.scaled(dt)));
  }
  auto field = [&](double s, const sym::GroupElement& y) -> VecX {
    return sym::lift(sym::act(y, origin), u.at(s), g).to_vector();
  };
  auto exp_map = [](const VecX& v) { return sym::exp(sym::GroupTangent::from_vector(v)); };
  return cf4_step(fs.X, dt, field, exp_map, sym::compose);
}

}  // namespace

FilterState init(std::size_t n_sensors, const NoiseConfig& cfg, const Options& opts) {
  return init_at(NavState::origin(n_sensors), cfg, opts);
}

FilterState init_at(const NavState& xi0, const NoiseConfig& cfg, const Options& opts) {
  cfg.validate(xi0.num_sensors());
  FilterState fs;
  fs.X = sym::from_origin(xi0);
  fs.P = cfg.p0_diag.asDiagonal();
  fs.cfg = cfg;
  fs.opts = opts;
  return fs;
}

MatX build_A(const FilterState& fs, const ImuInput& u) {
  const std::size_t n = fs.num_sensors();
  const Eigen::Index dim = layout::dim(n);
  const Vec3& g = fs.cfg.gravity;
  const Mat3& A_hat = fs.X.A().matrix();
  MatX a = MatX::Zero(dim, dim);

  // Upsilon_1: navigation error chain.
  a.block<3, 3>(layout::kVel, layout::kRot) = so3::wedge(g);
  a.block<3, 3>(layout::kPos, layout::kVel) = Mat3::Identity();

  // Upsilon_2 = [I_6; (b_hat^, 0)].
  a.block<6, 6>(layout::kRot, layout::kBiasGyro) = Mat6::Identity();
  a.block<3, 3>(layout::kPos, layout::kBiasGyro) = so3::wedge(fs.X.C.pos);

  // Upsilon_3 = ad(Upsilon_7), Upsilon_7 = Ad_{B_hat} u + c_hat + G_avg.
  Vec6 u6;
  u6 << u.gyro, u.acc;
  Vec6 gravity_twist = Vec6::Zero();
  gravity_twist.tail<3>() = g;
  const Vec6 upsilon7 = fs.X.B().adjoint() * u6 + fs.X.c + gravity_twist;
  a.block<6, 6>(layout::kBiasGyro, layout::kBiasGyro) = se3::ad(upsilon7);

  // Upsilon_4 = diag(Gamma_1 ... Gamma_N).
  const Mat3 gamma = so3::wedge(A_hat * u.gyro + fs.X.c.head<3>());
  for (std::size_t i = 0; i < n; ++i) {
    a.block<3, 3>(layout::calib(i), layout::calib(i)) = gamma;
  }
  return a;
}

MatX build_C(const FilterState& fs, std::size_t i, const Vec3& y) {
  const std::size_t n = fs.num_sensors();
  if (i >= n) throw std::out_of_range("build_C: sensor index out of range");
  MatX c = MatX::Zero(3, layout::dim(n));
  c.block<3, 3>(0, layout::kRot) = 0.5 * so3::wedge(y + fs.X.C.pos - fs.X.d[i]);
  c.block<3, 3>(0, layout::kPos) = -Mat3::Identity();
  c.block<3, 3>(0, layout::calib(i)) = Mat3::Identity();
  return c;
}

MatX process_noise(const FilterState& fs) {
  const NoiseConfig& cfg = fs.cfg;
  const std::size_t n = fs.num_sensors();
  MatX q = MatX::Zero(layout::dim(n), layout::dim(n));
  const double sg2 = cfg.sigma_gyro * cfg.sigma_gyro;
  const double sa2 = cfg.sigma_acc * cfg.sigma_acc;
  Vec6 input_var;
  input_var << Vec3::Constant(sg2), Vec3::Constant(sa2);
  Vec6 walk_var;
  walk_var << Vec3::Constant(cfg.sigma_bg_walk * cfg.sigma_bg_walk),
      Vec3::Constant(cfg.sigma_ba_walk * cfg.sigma_ba_walk);

  if (fs.opts.noise_model == ProcessNoiseModel::kDiagonal) {
    q.block<6, 6>(layout::kRot, layout::kRot) = input_var.asDiagonal();
    q.block<6, 6>(layout::kBiasGyro, layout::kBiasGyro) = walk_var.asDiagonal();
  } else {
    // IMU noise enters the lifted velocity as (n_w, n_a, 0) and reaches the
    // error through Ad_{C_hat}; its images in the bias and lever-arm slots cancel.
    const Eigen::Matrix<double, 9, 6> m = fs.X.C.adjoint().leftCols<6>();
    q.block<9, 9>(layout::kRot, layout::kRot) = m * input_var.asDiagonal() * m.transpose();
    const Mat6 ad_b = fs.X.B().adjoint();
    q.block<6, 6>(layout::kBiasGyro, layout::kBiasGyro) =
        ad_b * walk_var.asDiagonal() * ad_b.transpose();
  }
  const double st2 = cfg.sigma_calib_walk * cfg.sigma_calib_walk;
  for (std::size_t i = 0; i < n; ++i) {
    q.block<3, 3>(layout::calib(i), layout::calib(i)) = st2 * Mat3::Identity();
  }
  return q;
}

FilterState propagate(const FilterState& fs, const ImuInput& u, double dt) {
  return propagate(fs, InputSegment::constant(u), dt);
}

FilterState propagate(const FilterState& fs, const ImuInput& u0, const ImuInput& u1, double dt) {
  return propagate(fs, InputSegment::linear(u0, u1), dt);
}

FilterState propagate(const FilterState& fs, const InputSegment& u, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("propagate: dt must be > 0");
  if (!u.all_finite()) throw std::invalid_argument("propagate: non-finite IMU input");
  FilterState out = fs;
  const MatX a = build_A(fs, u.start);
  const Eigen::Index dim = a.rows();
  const MatX phi = fs.opts.exact_transition ? MatX((a * dt).exp())
                                            : MatX(MatX::Identity(dim, dim) + a * dt);
  out.P = phi * fs.P * phi.transpose() + process_noise(fs) * dt;
  symmetrize(out.P);
  out.X = integrate_lifted(fs, u, dt);
  out.t_last = fs.t_last + dt;
  return out;
}

UpdateOutcome update(const FilterState& fs, std::size_t i, const Vec3& y, const Mat3& R_meas) {
  if (i >= fs.num_sensors()) throw std::out_of_range("update: sensor index out of range");
  if (!y.allFinite()) throw std::invalid_argument("update: non-finite measurement");
  Eigen::LLT<Mat3> r_llt(R_meas);
  if (r_llt.info() != Eigen::Success || !R_meas.isApprox(R_meas.transpose())) {
    throw std::invalid_argument("update: measurement covariance must be SPD");
  }

  UpdateOutcome out{fs, UpdateStatus::kAccepted, {}, {}};
  UpdateQuantities& q = out.q;
  const MatX c = build_C(fs, i, y);
  q.N = R_meas;
  q.S = c * fs.P * c.transpose() + q.N;
  q.S = 0.5 * (q.S + q.S.transpose()).eval();
  q.delta = sym::output_rho(i, sym::inverse(fs.X), Vec3::Zero()) - y;

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(q.S);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > fs.opts.max_condition) {
    out.status = UpdateStatus::kRejectedConditioning;
    out.diagnostic = "innovation covariance ill-conditioned (cond = " +
                     std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")";
    return out;
  }
  const Eigen::LDLT<Mat3> s_ldlt(q.S);
  q.mahalanobis = std::sqrt(q.delta.dot(s_ldlt.solve(q.delta)));
  if (q.mahalanobis > fs.opts.gate) {
    out.status = UpdateStatus::kRejectedGate;
    out.diagnostic = "innovation gated (distance " + std::to_string(q.mahalanobis) + ")";
    return out;
  }

  q.K = s_ldlt.solve(c * fs.P).transpose();
  q.Delta = sym::GroupTangent::from_vector(q.K * q.delta);
  out.state.X = sym::compose(sym::exp(q.Delta), fs.X);
  const Eigen::Index dim = fs.P.rows();
  out.state.P = (MatX::Identity(dim, dim) - q.K * c) * fs.P;
  symmetrize(out.state.P);
  return out;
}

NavState state_estimate(const FilterState& fs) {
  return sym::act(fs.X, NavState::origin(fs.num_sensors()));
}

}  // namespace equinav::eqf
