#pragma once

#include <cstddef>
#include <vector>

#include "equinav/lie.hpp"
#include "equinav/types.hpp"

// Symmetry group G = (SE_2(3) x| se(3)) x| (R^3)^N of the biased INS with N
// lever-arm states, its right action on the state space and the lift.
namespace equinav::sym {

/// X = (C, c, d_1 ... d_N) with C = (B, b) in SE_2(3) and B = (A, a) in SE(3).
struct GroupElement {
  SE23 C;
  Vec6 c = Vec6::Zero();
  std::vector<Vec3> d;

  std::size_t num_sensors() const { return d.size(); }
  const Rot3& A() const { return C.rot; }
  SE3 B() const { return C.rot_vel(); }
};

/// Tangent vector (lambda_C, lambda_c, lambda_d); flattened in error order.
struct GroupTangent {
  Vec9 C = Vec9::Zero();
  Vec6 c = Vec6::Zero();
  std::vector<Vec3> d;

  static GroupTangent zero(std::size_t n_sensors);
  static GroupTangent from_vector(const VecX& v);
  VecX to_vector() const;
  GroupTangent scaled(double s) const;
  std::size_t num_sensors() const { return d.size(); }
};

GroupElement identity(std::size_t n_sensors);

/// (C1 C2, c1 + Ad_{B1} c2, d1 + A1 d2), the law compatible with the right
/// action: phi(X1 X2, xi) = phi(X2, phi(X1, xi)).
GroupElement compose(const GroupElement& x1, const GroupElement& x2);
GroupElement inverse(const GroupElement& x);

/// Semi-direct exponential: (exp(l_C), J(Pi l_C) l_c, J_l(l_w) l_d).
GroupElement exp(const GroupTangent& u);
GroupTangent log(const GroupElement& x);

/// Right action phi(X, xi) = (T C, Ad_{B^-1}(b - c), A^T (t_i - d_i)).
NavState act(const GroupElement& x, const NavState& xi);

/// Unique X with phi(X, origin) = e.
GroupElement from_origin(const NavState& e);

/// h_i(xi) = R^T (delta - (p + R t_i)).
Vec3 output_h(std::size_t i, const NavState& xi, const Vec3& delta_known);

/// rho_i(X, y) = A^T (y - b + d_i).
Vec3 output_rho(std::size_t i, const GroupElement& x, const Vec3& y);

/// Lambda(xi, u) = (Lambda_I, Lambda_II, Lambda_i).
GroupTangent lift(const NavState& xi, const ImuInput& u, const Vec3& gravity);

/// Core part Lambda_I = (W - B + D) + T^-1 (G - D) T as a 5x5 matrix.
Mat5 lift_core_matrix(const NavState& xi, const ImuInput& u, const Vec3& gravity);

/// Normal coordinates about the origin: eps = log(phi_origin^-1(e)).
VecX coords(const NavState& e);
NavState coords_inv(const VecX& eps);

/// Deterministic vector field of the biased INS with lever arms.
struct StateDerivative {
  Mat3 R_dot;
  Vec3 v_dot;
  Vec3 p_dot;
  Vec3 b_gyro_dot;
  Vec3 b_acc_dot;
  std::vector<Vec3> calib_dot;
};
StateDerivative vector_field(const NavState& xi, const ImuInput& u, const Vec3& gravity);

void check_sizes(std::size_t expected, std::size_t got, const char* what);

}  // namespace equinav::sym
