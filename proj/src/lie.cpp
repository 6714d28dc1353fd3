#include "equinav/lie.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

namespace equinav {
namespace {

// Below this angle the trigonometric coefficients switch to Taylor series.
constexpr double kSeriesAngle = 0.1;
// The higher-order SE(3) Jacobian coefficients cancel more severely.
constexpr double kSeriesAngleHigh = 0.5;

// sin(t)/t
double coeff_a(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)));
  }
  return std::sin(t) / t;
}

// (1 - cos(t))/t^2
double coeff_b(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0 +
           t2 * t2 * t2 * t2 / 3628800.0;
  }
  return (1.0 - std::cos(t)) / (t * t);
}

// (t - sin(t))/t^3
double coeff_c(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0 +
           t2 * t2 * t2 * t2 / 39916800.0;
  }
  return (t - std::sin(t)) / (t * t * t);
}

// 1/t^2 - (1 + cos(t)) / (2 t sin(t)), used by the inverse left Jacobian.
double coeff_d(double t) {
  if (t < kSeriesAngle) {
    const double t2 = t * t;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0;
  }
  return 1.0 / (t * t) - 1.0 / (2.0 * t * std::tan(0.5 * t));
}

// (1 - t^2/2 - cos(t))/t^4
double coeff_q2(double t) {
  if (t < kSeriesAngleHigh) {
    const double t2 = t * t;
    return -1.0 / 24.0 + t2 / 720.0 - t2 * t2 / 40320.0 + t2 * t2 * t2 / 3628800.0 -
           t2 * t2 * t2 * t2 / 479001600.0 + t2 * t2 * t2 * t2 * t2 / 87178291200.0;
  }
  const double t2 = t * t;
  return (1.0 - 0.5 * t2 - std::cos(t)) / (t2 * t2);
}

// (t - sin(t) - t^3/6)/t^5
double coeff_q3(double t) {
  if (t < kSeriesAngleHigh) {
    const double t2 = t * t;
    return -1.0 / 120.0 + t2 / 5040.0 - t2 * t2 / 362880.0 + t2 * t2 * t2 / 39916800.0 -
           t2 * t2 * t2 * t2 / 6227020800.0 +
           t2 * t2 * t2 * t2 * t2 / 1307674368000.0;
  }
  const double t2 = t * t;
  return (t - std::sin(t) - t2 * t / 6.0) / (t2 * t2 * t);
}

// Bottom-left block of the SE(3) left Jacobian for (rot, trans) = (w, rho).
Mat3 se3_q_block(const Vec3& w, const Vec3& rho) {
  const double t = w.norm();
  const Mat3 W = so3::wedge(w);
  const Mat3 P = so3::wedge(rho);
  const Mat3 WP = W * P;
  const Mat3 PW = P * W;
  const Mat3 WPW = WP * W;
  const double c1 = coeff_c(t);
  const double c2 = coeff_q2(t);
  const double c3 = coeff_q3(t);
  return 0.5 * P + c1 * (WP + PW + WPW) - c2 * (W * WP + PW * W - 3.0 * WPW) -
         0.5 * (c2 - 3.0 * c3) * (WPW * W + W * WPW);
}

}  // namespace

namespace so3 {

Mat3 wedge(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 exp(const Vec3& w) {
  const double t = w.norm();
  const Mat3 W = wedge(w);
  return Mat3::Identity() + coeff_a(t) * W + coeff_b(t) * W * W;
}

Vec3 log(const Mat3& r) {
  const Vec3 axis2s = vee(r - r.transpose());  // 2 sin(t) * axis
  const double s = 0.5 * axis2s.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double t = std::atan2(s, c);
  if (std::numbers::pi - t < lie::kBranchTolerance) {
    throw BranchError("so3::log: rotation angle at pi, principal branch undefined");
  }
  return 0.5 / coeff_a(t) * axis2s;
}

Mat3 left_jacobian(const Vec3& w) {
  const double t = w.norm();
  const Mat3 W = wedge(w);
  return Mat3::Identity() + coeff_b(t) * W + coeff_c(t) * W * W;
}

Mat3 left_jacobian_inv(const Vec3& w) {
  const double t = w.norm();
  const Mat3 W = wedge(w);
  return Mat3::Identity() - 0.5 * W + coeff_d(t) * W * W;
}

double angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  const double s = 0.5 * vee(rel - rel.transpose()).norm();
  const double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, c);
}

}  // namespace so3

namespace se3 {

Mat4 wedge(const Vec6& u) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = so3::wedge(u.head<3>());
  m.topRightCorner<3, 1>() = u.tail<3>();
  return m;
}

Vec6 vee(const Mat4& m) {
  Vec6 u;
  u << so3::vee(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>();
  return u;
}

Mat6 ad(const Vec6& u) {
  Mat6 m = Mat6::Zero();
  const Mat3 W = so3::wedge(u.head<3>());
  m.topLeftCorner<3, 3>() = W;
  m.bottomRightCorner<3, 3>() = W;
  m.bottomLeftCorner<3, 3>() = so3::wedge(u.tail<3>());
  return m;
}

Mat6 left_jacobian(const Vec6& u) {
  Mat6 j = Mat6::Zero();
  const Mat3 jl = so3::left_jacobian(u.head<3>());
  j.topLeftCorner<3, 3>() = jl;
  j.bottomRightCorner<3, 3>() = jl;
  j.bottomLeftCorner<3, 3>() = se3_q_block(u.head<3>(), u.tail<3>());
  return j;
}

Mat6 left_jacobian_inv(const Vec6& u) {
  Mat6 j = Mat6::Zero();
  const Mat3 jl_inv = so3::left_jacobian_inv(u.head<3>());
  j.topLeftCorner<3, 3>() = jl_inv;
  j.bottomRightCorner<3, 3>() = jl_inv;
  j.bottomLeftCorner<3, 3>() =
      -jl_inv * se3_q_block(u.head<3>(), u.tail<3>()) * jl_inv;
  return j;
}

}  // namespace se3

namespace se23 {

Mat5 wedge(const Vec9& u) {
  Mat5 m = Mat5::Zero();
  m.topLeftCorner<3, 3>() = so3::wedge(u.head<3>());
  m.block<3, 1>(0, 3) = u.segment<3>(3);
  m.block<3, 1>(0, 4) = u.segment<3>(6);
  return m;
}

Vec9 vee(const Mat5& m) {
  Vec9 u;
  u << so3::vee(m.topLeftCorner<3, 3>()), m.block<3, 1>(0, 3), m.block<3, 1>(0, 4);
  return u;
}

Mat9 ad(const Vec9& u) {
  Mat9 m = Mat9::Zero();
  const Mat3 W = so3::wedge(u.head<3>());
  m.block<3, 3>(0, 0) = W;
  m.block<3, 3>(3, 3) = W;
  m.block<3, 3>(6, 6) = W;
  m.block<3, 3>(3, 0) = so3::wedge(u.segment<3>(3));
  m.block<3, 3>(6, 0) = so3::wedge(u.segment<3>(6));
  return m;
}

}  // namespace se23

Rot3::Rot3(const Mat3& m) : m_(m) {
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-9) || !(std::abs(m.determinant() - 1.0) < 1e-9)) {
    throw std::invalid_argument("Rot3: matrix is not a proper rotation");
  }
}

Rot3 Rot3::exp(const Vec3& w) { return Rot3(so3::exp(w), Unchecked{}); }

Rot3 Rot3::project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return Rot3(svd.matrixU() * d * svd.matrixV().transpose(), Unchecked{});
}

Rot3 Rot3::from_quaternion(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  if (!(std::abs(q.norm() - 1.0) < 1e-6)) {
    throw std::invalid_argument("Rot3: quaternion is not unit length");
  }
  return Rot3(q.normalized().toRotationMatrix(), Unchecked{});
}

Rot3 Rot3::inverse() const { return Rot3(m_.transpose(), Unchecked{}); }

Eigen::Vector4d Rot3::quaternion() const {
  Eigen::Quaterniond q(m_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

Rot3 Rot3::operator*(const Rot3& other) const {
  return Rot3(m_ * other.m_, Unchecked{});
}

SE3 SE3::exp(const Vec6& u) {
  return {Rot3::exp(u.head<3>()), so3::left_jacobian(u.head<3>()) * u.tail<3>()};
}

Vec6 SE3::log() const {
  const Vec3 w = rot.log();
  Vec6 u;
  u << w, so3::left_jacobian_inv(w) * trans;
  return u;
}

SE3 SE3::inverse() const {
  const Rot3 rt = rot.inverse();
  return {rt, -(rt * trans)};
}

Mat4 SE3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rot.matrix();
  m.topRightCorner<3, 1>() = trans;
  return m;
}

Mat6 SE3::adjoint() const {
  Mat6 m = Mat6::Zero();
  const Mat3& r = rot.matrix();
  m.topLeftCorner<3, 3>() = r;
  m.bottomRightCorner<3, 3>() = r;
  m.bottomLeftCorner<3, 3>() = so3::wedge(trans) * r;
  return m;
}

SE3 SE3::operator*(const SE3& other) const {
  return {rot * other.rot, trans + rot * other.trans};
}

SE23 SE23::exp(const Vec9& u) {
  const Mat3 jl = so3::left_jacobian(u.head<3>());
  return {Rot3::exp(u.head<3>()), jl * u.segment<3>(3), jl * u.segment<3>(6)};
}

SE23 SE23::from_matrix(const Mat5& m) {
  return {Rot3(m.topLeftCorner<3, 3>()), m.block<3, 1>(0, 3), m.block<3, 1>(0, 4)};
}

Vec9 SE23::log() const {
  const Vec3 w = rot.log();
  const Mat3 jl_inv = so3::left_jacobian_inv(w);
  Vec9 u;
  u << w, jl_inv * vel, jl_inv * pos;
  return u;
}

SE23 SE23::inverse() const {
  const Rot3 rt = rot.inverse();
  return {rt, -(rt * vel), -(rt * pos)};
}

Mat5 SE23::matrix() const {
  Mat5 m = Mat5::Identity();
  m.topLeftCorner<3, 3>() = rot.matrix();
  m.block<3, 1>(0, 3) = vel;
  m.block<3, 1>(0, 4) = pos;
  return m;
}

Mat9 SE23::adjoint() const {
  Mat9 m = Mat9::Zero();
  const Mat3& r = rot.matrix();
  m.block<3, 3>(0, 0) = r;
  m.block<3, 3>(3, 3) = r;
  m.block<3, 3>(6, 6) = r;
  m.block<3, 3>(3, 0) = so3::wedge(vel) * r;
  m.block<3, 3>(6, 0) = so3::wedge(pos) * r;
  return m;
}

SE23 SE23::operator*(const SE23& other) const {
  return {rot * other.rot, vel + rot * other.vel, pos + rot * other.pos};
}

namespace lie {

InsMatrices build_ins_matrices(const Vec3& omega, const Vec3& acc,
                               const Vec6& bias, const Vec3& gravity) {
  InsMatrices m;
  m.W.topLeftCorner<3, 3>() = so3::wedge(omega);
  m.W.block<3, 1>(0, 3) = acc;
  m.B.topLeftCorner<3, 3>() = so3::wedge(bias.head<3>());
  m.B.block<3, 1>(0, 3) = bias.tail<3>();
  m.G.block<3, 1>(0, 3) = gravity;
  m.D(3, 4) = 1.0;
  m.G_avg = m.G.topLeftCorner<4, 4>();
  return m;
}

}  // namespace lie
}  // namespace equinav
