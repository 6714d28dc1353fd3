#include "equinav/mekf.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "equinav/integrator.hpp"
#include "equinav/symmetry.hpp"

namespace equinav::mekf {

MekfState init(std::size_t n_sensors, const NoiseConfig& cfg, const Options& opts) {
  return init_at(NavState::origin(n_sensors), cfg, opts);
}

MekfState init_at(const NavState& xi0, const NoiseConfig& cfg, const Options& opts) {
  cfg.validate(xi0.num_sensors());
  MekfState ms;
  ms.nominal = xi0;
  ms.P = cfg.p0_diag.asDiagonal();
  ms.cfg = cfg;
  ms.opts = opts;
  return ms;
}

NavState integrate_nominal(const NavState& xi, const InputSegment& u, double dt,
                           const Vec3& gravity) {
  // dT/dt = T Lambda_I(T, u) on SE_2(3); biases enter Lambda_I directly.
  NavState frozen = xi;
  auto field = [&](double s, const SE23& t) -> Vec9 {
    frozen.R = t.rot;
    frozen.v = t.vel;
    frozen.p = t.pos;
    return se23::vee(sym::lift_core_matrix(frozen, u.at(s), gravity));
  };
  auto exp_map = [](const Vec9& v) { return SE23::exp(v); };
  auto mul = [](const SE23& a, const SE23& b) { return a * b; };
  const SE23 t1 = cf4_step(SE23{xi.R, xi.v, xi.p}, dt, field, exp_map, mul);
  NavState out = xi;
  out.R = t1.rot;
  out.v = t1.vel;
  out.p = t1.pos;
  return out;
}

MatX error_dynamics(const MekfState& ms, const ImuInput& u) {
  const NavState& x = ms.nominal;
  const Eigen::Index dim = layout::dim(ms.num_sensors());
  MatX f = MatX::Zero(dim, dim);
  f.block<3, 3>(layout::kRot, layout::kRot) = -so3::wedge(u.gyro - x.b_gyro);
  f.block<3, 3>(layout::kRot, layout::kBiasGyro) = -Mat3::Identity();
  f.block<3, 3>(layout::kVel, layout::kRot) = -x.R.matrix() * so3::wedge(u.acc - x.b_acc);
  f.block<3, 3>(layout::kVel, layout::kBiasAcc) = -x.R.matrix();
  f.block<3, 3>(layout::kPos, layout::kVel) = Mat3::Identity();
  return f;
}

MatX measurement_jacobian(const MekfState& ms, std::size_t i) {
  if (i >= ms.num_sensors()) throw std::out_of_range("mekf: sensor index out of range");
  const NavState& x = ms.nominal;
  MatX h = MatX::Zero(3, layout::dim(ms.num_sensors()));
  h.block<3, 3>(0, layout::kRot) = -x.R.matrix() * so3::wedge(x.calib[i]);
  h.block<3, 3>(0, layout::kPos) = Mat3::Identity();
  h.block<3, 3>(0, layout::calib(i)) = x.R.matrix();
  return h;
}

MekfState propagate(const MekfState& ms, const ImuInput& u, double dt) {
  return propagate(ms, InputSegment::constant(u), dt);
}

MekfState propagate(const MekfState& ms, const ImuInput& u0, const ImuInput& u1, double dt) {
  return propagate(ms, InputSegment::linear(u0, u1), dt);
}

MekfState propagate(const MekfState& ms, const InputSegment& u, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("propagate: dt must be > 0");
  if (!u.all_finite()) throw std::invalid_argument("propagate: non-finite IMU input");
  const NoiseConfig& cfg = ms.cfg;
  const Eigen::Index dim = ms.P.rows();
  const MatX phi = MatX::Identity(dim, dim) + error_dynamics(ms, u.start) * dt;

  VecX q = VecX::Zero(dim);
  q.segment<3>(layout::kRot).setConstant(cfg.sigma_gyro * cfg.sigma_gyro);
  q.segment<3>(layout::kVel).setConstant(cfg.sigma_acc * cfg.sigma_acc);
  q.segment<3>(layout::kBiasGyro).setConstant(cfg.sigma_bg_walk * cfg.sigma_bg_walk);
  q.segment<3>(layout::kBiasAcc).setConstant(cfg.sigma_ba_walk * cfg.sigma_ba_walk);
  q.tail(dim - layout::kCore).setConstant(cfg.sigma_calib_walk * cfg.sigma_calib_walk);

  MekfState out = ms;
  out.P = phi * ms.P * phi.transpose();
  out.P.diagonal() += q * dt;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  out.nominal = integrate_nominal(ms.nominal, u, dt, cfg.gravity);
  out.t_last = ms.t_last + dt;
  return out;
}

UpdateOutcome update(const MekfState& ms, std::size_t i, const Vec3& y, const Mat3& R_meas) {
  if (!y.allFinite()) throw std::invalid_argument("update: non-finite measurement");
  Eigen::LLT<Mat3> r_llt(R_meas);
  if (r_llt.info() != Eigen::Success) {
    throw std::invalid_argument("update: measurement covariance must be SPD");
  }
  UpdateOutcome out{ms, UpdateStatus::kAccepted, {}, Vec3::Zero(), {}};
  const MatX h = measurement_jacobian(ms, i);
  Mat3 s = h * ms.P * h.transpose() + R_meas;
  s = 0.5 * (s + s.transpose()).eval();
  out.residual = y - ms.nominal.antenna_position(i);

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > ms.opts.max_condition) {
    out.status = UpdateStatus::kRejectedConditioning;
    out.diagnostic = "innovation covariance ill-conditioned";
    return out;
  }
  const Eigen::LDLT<Mat3> s_ldlt(s);
  const double dist = std::sqrt(out.residual.dot(s_ldlt.solve(out.residual)));
  if (dist > ms.opts.gate) {
    out.status = UpdateStatus::kRejectedGate;
    out.diagnostic = "innovation gated (distance " + std::to_string(dist) + ")";
    return out;
  }

  const MatX k = s_ldlt.solve(h * ms.P).transpose();
  out.correction = k * out.residual;
  const VecX& dx = out.correction;
  NavState& x = out.state.nominal;
  x.R = x.R * Rot3::exp(dx.segment<3>(layout::kRot));
  x.v += dx.segment<3>(layout::kVel);
  x.p += dx.segment<3>(layout::kPos);
  x.b_gyro += dx.segment<3>(layout::kBiasGyro);
  x.b_acc += dx.segment<3>(layout::kBiasAcc);
  for (std::size_t j = 0; j < x.calib.size(); ++j) x.calib[j] += dx.segment<3>(layout::calib(j));

  const Eigen::Index dim = ms.P.rows();
  const MatX ikh = MatX::Identity(dim, dim) - k * h;
  out.state.P = ikh * ms.P * ikh.transpose() + k * R_meas * k.transpose();
  out.state.P = 0.5 * (out.state.P + out.state.P.transpose()).eval();
  return out;
}

}  // namespace equinav::mekf
