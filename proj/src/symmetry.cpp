#include "equinav/symmetry.hpp"

#include <cmath>
#include <string>

namespace equinav::sym {

void check_sizes(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ConfigError(std::string(what) + ": sensor count mismatch (" +
                      std::to_string(expected) + " vs " + std::to_string(got) + ")");
  }
}

GroupTangent GroupTangent::zero(std::size_t n_sensors) {
  GroupTangent u;
  u.d.assign(n_sensors, Vec3::Zero());
  return u;
}

GroupTangent GroupTangent::from_vector(const VecX& v) {
  const auto n_extra = v.size() - layout::kCore;
  if (v.size() < layout::kCore + 3 || n_extra % 3 != 0) {
    throw ConfigError("GroupTangent: vector length must be 15 + 3N with N >= 1");
  }
  GroupTangent u;
  u.C = v.head<9>();
  u.c = v.segment<6>(9);
  for (Eigen::Index i = 0; i < n_extra / 3; ++i) {
    u.d.push_back(v.segment<3>(layout::kCore + 3 * i));
  }
  return u;
}

VecX GroupTangent::to_vector() const {
  VecX v(layout::dim(d.size()));
  v.head<9>() = C;
  v.segment<6>(9) = c;
  for (std::size_t i = 0; i < d.size(); ++i) v.segment<3>(layout::calib(i)) = d[i];
  return v;
}

GroupTangent GroupTangent::scaled(double s) const {
  GroupTangent u{s * C, s * c, d};
  for (auto& di : u.d) di *= s;
  return u;
}

GroupElement identity(std::size_t n_sensors) {
  if (n_sensors == 0) throw ConfigError("identity: at least one sensor required");
  GroupElement x;
  x.d.assign(n_sensors, Vec3::Zero());
  return x;
}

GroupElement compose(const GroupElement& x1, const GroupElement& x2) {
  check_sizes(x1.num_sensors(), x2.num_sensors(), "compose");
  GroupElement out;
  out.C = x1.C * x2.C;
  out.c = x1.c + x1.B().adjoint() * x2.c;
  out.d.resize(x1.d.size());
  for (std::size_t i = 0; i < x1.d.size(); ++i) out.d[i] = x1.d[i] + x1.A() * x2.d[i];
  return out;
}

GroupElement inverse(const GroupElement& x) {
  GroupElement out;
  out.C = x.C.inverse();
  out.c = -(out.B().adjoint() * x.c);
  out.d.resize(x.d.size());
  const Mat3 at = x.A().matrix().transpose();
  for (std::size_t i = 0; i < x.d.size(); ++i) out.d[i] = -(at * x.d[i]);
  return out;
}

GroupElement exp(const GroupTangent& u) {
  GroupElement x;
  x.C = SE23::exp(u.C);
  x.c = se3::left_jacobian(lie::pi_map(u.C)) * u.c;
  const Mat3 jl = so3::left_jacobian(u.C.head<3>());
  x.d.resize(u.d.size());
  for (std::size_t i = 0; i < u.d.size(); ++i) x.d[i] = jl * u.d[i];
  return x;
}

GroupTangent log(const GroupElement& x) {
  GroupTangent u;
  u.C = x.C.log();
  u.c = se3::left_jacobian_inv(lie::pi_map(u.C)) * x.c;
  const Mat3 jl_inv = so3::left_jacobian_inv(u.C.head<3>());
  u.d.resize(x.d.size());
  for (std::size_t i = 0; i < x.d.size(); ++i) u.d[i] = jl_inv * x.d[i];
  return u;
}

NavState act(const GroupElement& x, const NavState& xi) {
  check_sizes(x.num_sensors(), xi.num_sensors(), "act");
  const SE23 pose = SE23{xi.R, xi.v, xi.p} * x.C;
  NavState out;
  out.R = pose.rot;
  out.v = pose.vel;
  out.p = pose.pos;
  out.set_bias(x.B().inverse().adjoint() * (xi.bias() - x.c));
  const Mat3 at = x.A().matrix().transpose();
  out.calib.resize(xi.calib.size());
  for (std::size_t i = 0; i < xi.calib.size(); ++i) out.calib[i] = at * (xi.calib[i] - x.d[i]);
  return out;
}

GroupElement from_origin(const NavState& e) {
  GroupElement x;
  x.C = SE23{e.R, e.v, e.p};
  x.c = -(x.B().adjoint() * e.bias());
  x.d.resize(e.calib.size());
  for (std::size_t i = 0; i < e.calib.size(); ++i) x.d[i] = -(e.R * e.calib[i]);
  return x;
}

Vec3 output_h(std::size_t i, const NavState& xi, const Vec3& delta_known) {
  if (i >= xi.num_sensors()) throw std::out_of_range("output_h: sensor index out of range");
  return xi.R.matrix().transpose() * (delta_known - xi.antenna_position(i));
}

Vec3 output_rho(std::size_t i, const GroupElement& x, const Vec3& y) {
  if (i >= x.num_sensors()) throw std::out_of_range("output_rho: sensor index out of range");
  return x.A().matrix().transpose() * (y - x.C.pos + x.d[i]);
}

Mat5 lift_core_matrix(const NavState& xi, const ImuInput& u, const Vec3& gravity) {
  const lie::InsMatrices m = lie::build_ins_matrices(u.gyro, u.acc, xi.bias(), gravity);
  const SE23 pose{xi.R, xi.v, xi.p};
  return (m.W - m.B + m.D) + pose.inverse().matrix() * (m.G - m.D) * pose.matrix();
}

GroupTangent lift(const NavState& xi, const ImuInput& u, const Vec3& gravity) {
  if (!u.gyro.allFinite() || !u.acc.allFinite()) {
    throw std::invalid_argument("lift: non-finite IMU input");
  }
  const Mat5 core = lift_core_matrix(xi, u, gravity);
  if (!(core.bottomRows<2>().cwiseAbs().maxCoeff() < 1e-12)) {
    throw std::logic_error("lift: Lambda_I left se_2(3)");
  }
  GroupTangent out;
  out.C = se23::vee(core);
  out.c = se3::ad(xi.bias()) * lie::pi_map(out.C);
  const Vec3 w = u.gyro - xi.b_gyro;
  out.d.resize(xi.calib.size());
  for (std::size_t i = 0; i < xi.calib.size(); ++i) out.d[i] = -w.cross(xi.calib[i]);
  return out;
}

VecX coords(const NavState& e) { return log(from_origin(e)).to_vector(); }

NavState coords_inv(const VecX& eps) {
  const GroupTangent u = GroupTangent::from_vector(eps);
  return act(exp(u), NavState::origin(u.num_sensors()));
}

StateDerivative vector_field(const NavState& xi, const ImuInput& u, const Vec3& gravity) {
  StateDerivative f;
  const Vec3 w = u.gyro - xi.b_gyro;
  f.R_dot = xi.R.matrix() * so3::wedge(w);
  f.v_dot = xi.R * (u.acc - xi.b_acc) + gravity;
  f.p_dot = xi.v;
  f.b_gyro_dot.setZero();
  f.b_acc_dot.setZero();
  f.calib_dot.assign(xi.calib.size(), Vec3::Zero());
  return f;
}

}  // namespace equinav::sym
