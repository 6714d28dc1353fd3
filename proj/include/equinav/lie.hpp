#pragma once

#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace equinav {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Raised by logarithm maps when the rotation angle reaches pi, where the
/// principal branch is not unique.
class BranchError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace lie {

/// Angles within this distance of pi are rejected by the logarithms.
inline constexpr double kBranchTolerance = 1e-6;

}  // namespace lie

namespace so3 {

Mat3 wedge(const Vec3& w);
Vec3 vee(const Mat3& m);
Mat3 exp(const Vec3& w);
/// Principal logarithm; throws BranchError at angle pi.
Vec3 log(const Mat3& r);
Mat3 left_jacobian(const Vec3& w);
Mat3 left_jacobian_inv(const Vec3& w);
/// Geodesic angle between two rotations, in radians.
double angle_between(const Mat3& a, const Mat3& b);

}  // namespace so3

// Coefficient ordering is (rotation, translation).
namespace se3 {

Mat4 wedge(const Vec6& u);
Vec6 vee(const Mat4& m);
Mat6 ad(const Vec6& u);
/// Left Jacobian sum_k ad_u^k / (k+1)!, closed form.
Mat6 left_jacobian(const Vec6& u);
Mat6 left_jacobian_inv(const Vec6& u);

}  // namespace se3

// Coefficient ordering is (rotation, velocity column, position column).
namespace se23 {

Mat5 wedge(const Vec9& u);
Vec9 vee(const Mat5& m);
Mat9 ad(const Vec9& u);

}  // namespace se23

class Rot3 {
 public:
  Rot3() : m_(Mat3::Identity()) {}
  /// Wraps an existing rotation matrix. Orthonormality is checked to 1e-9.
  explicit Rot3(const Mat3& m);

  static Rot3 identity() { return Rot3(); }
  static Rot3 exp(const Vec3& w);
  /// Re-orthonormalizes a near-rotation matrix via SVD.
  static Rot3 project(const Mat3& m);
  static Rot3 from_quaternion(double w, double x, double y, double z);

  Vec3 log() const { return so3::log(m_); }
  Rot3 inverse() const;
  const Mat3& matrix() const { return m_; }
  /// Unit quaternion (w, x, y, z) with w >= 0.
  Eigen::Vector4d quaternion() const;

  Rot3 operator*(const Rot3& other) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  struct Unchecked {};
  Rot3(const Mat3& m, Unchecked) : m_(m) {}

  Mat3 m_;
};

struct SE3 {
  Rot3 rot;
  Vec3 trans = Vec3::Zero();

  static SE3 identity() { return {}; }
  static SE3 exp(const Vec6& u);
  Vec6 log() const;
  SE3 inverse() const;
  Mat4 matrix() const;
  /// 6x6 Adjoint matrix acting on (rotation, translation) coefficients.
  Mat6 adjoint() const;
  SE3 operator*(const SE3& other) const;
};

/// Extended pose (R, v, p) in SE_2(3).
struct SE23 {
  Rot3 rot;
  Vec3 vel = Vec3::Zero();
  Vec3 pos = Vec3::Zero();

  static SE23 identity() { return {}; }
  static SE23 exp(const Vec9& u);
  static SE23 from_matrix(const Mat5& m);
  Vec9 log() const;
  SE23 inverse() const;
  Mat5 matrix() const;
  Mat9 adjoint() const;
  /// The (R, v) factor as an SE(3) element.
  SE3 rot_vel() const { return {rot, vel}; }
  SE23 operator*(const SE23& other) const;
};

namespace lie {

/// Drops the position column: (x, y, z) -> (x, y).
inline Vec6 pi_map(const Vec9& u) { return u.head<6>(); }

/// 5x5 embeddings of the biased INS written as
/// dT/dt = T (W - B + D) + (G - D) T.
struct InsMatrices {
  Mat5 W = Mat5::Zero();
  Mat5 B = Mat5::Zero();
  Mat5 G = Mat5::Zero();
  Mat5 D = Mat5::Zero();
  Mat4 G_avg = Mat4::Zero();
};

InsMatrices build_ins_matrices(const Vec3& omega, const Vec3& acc,
                               const Vec6& bias, const Vec3& gravity);

}  // namespace lie
}  // namespace equinav
