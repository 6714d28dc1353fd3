#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "equinav/lie.hpp"

namespace equinav {

/// Inconsistent sensor counts, vector sizes or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Biased INS state with N body-frame GNSS lever arms.
struct NavState {
  Rot3 R;
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 b_gyro = Vec3::Zero();
  Vec3 b_acc = Vec3::Zero();
  std::vector<Vec3> calib;

  /// The origin (identity pose, zero biases, zero lever arms).
  static NavState origin(std::size_t n_sensors) {
    NavState s;
    s.calib.assign(n_sensors, Vec3::Zero());
    return s;
  }

  std::size_t num_sensors() const { return calib.size(); }

  Vec6 bias() const {
    Vec6 b;
    b << b_gyro, b_acc;
    return b;
  }

  void set_bias(const Vec6& b) {
    b_gyro = b.head<3>();
    b_acc = b.tail<3>();
  }

  /// Global position of antenna i: p + R t_i.
  Vec3 antenna_position(std::size_t i) const { return p + R * calib.at(i); }
};

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
};

struct GnssSample {
  double t = 0.0;
  std::size_t sensor = 0;  // zero-based
  Vec3 pos = Vec3::Zero();
  /// Per-axis variance; a non-positive entry means "use the configured default".
  Vec3 var = Vec3::Constant(-1.0);
};

/// IMU input (omega, a) evaluated at a point inside a propagation interval.
struct ImuInput {
  Vec3 gyro = Vec3::Zero();
  Vec3 acc = Vec3::Zero();

  static ImuInput lerp(const ImuInput& a, const ImuInput& b, double s) {
    return {a.gyro + s * (b.gyro - a.gyro), a.acc + s * (b.acc - a.acc)};
  }
};

inline ImuInput input_of(const ImuSample& s) { return {s.gyro, s.acc}; }

/// Input over one propagation step, quadratic in the normalized time s in
/// [0, 1] through its values at s = 0, 1/2 and 1.
struct InputSegment {
  ImuInput start, mid, end;

  static InputSegment constant(const ImuInput& u) { return {u, u, u}; }
  static InputSegment linear(const ImuInput& a, const ImuInput& b) {
    return {a, ImuInput::lerp(a, b, 0.5), b};
  }

  ImuInput at(double s) const {
    const double l0 = 2.0 * (s - 0.5) * (s - 1.0);
    const double l1 = -4.0 * s * (s - 1.0);
    const double l2 = 2.0 * s * (s - 0.5);
    return {l0 * start.gyro + l1 * mid.gyro + l2 * end.gyro,
            l0 * start.acc + l1 * mid.acc + l2 * end.acc};
  }
  bool all_finite() const {
    return start.gyro.allFinite() && start.acc.allFinite() && mid.gyro.allFinite() &&
           mid.acc.allFinite() && end.gyro.allFinite() && end.acc.allFinite();
  }
};

/// Noise densities and the prior shared by every filter variant.
struct NoiseConfig {
  double sigma_gyro = 1e-3;        // rad/s/sqrt(Hz)
  double sigma_acc = 1e-2;         // m/s^2/sqrt(Hz)
  double sigma_bg_walk = 1e-5;     // rad/s^2/sqrt(Hz)
  double sigma_ba_walk = 1e-4;     // m/s^3/sqrt(Hz)
  double sigma_calib_walk = 1e-4;  // m/s/sqrt(Hz), regularizer only
  VecX p0_diag;                    // (15 + 3N) variances
  Vec3 gravity = Vec3(0.0, 0.0, 9.81);  // z-down global frame

  /// Throws ConfigError unless sigmas are non-negative and p0_diag is
  /// positive with length 15 + 3N.
  void validate(std::size_t n_sensors) const;
};

/// Prior standard deviations per state block.
struct PriorStd {
  double att = 0.5;     // rad
  double vel = 2.0;     // m/s
  double pos = 1.0;     // m
  double bias_gyro = 0.02;
  double bias_acc = 0.1;
  double calib = 0.5;   // m
};

/// Squared per-block standard deviations laid out in error-vector order.
VecX make_p0_diag(const PriorStd& prior, std::size_t n_sensors);

/// Error vector layout (R, v, p, b_gyro, b_acc, t_1 ... t_N).
namespace layout {

inline constexpr Eigen::Index kRot = 0;
inline constexpr Eigen::Index kVel = 3;
inline constexpr Eigen::Index kPos = 6;
inline constexpr Eigen::Index kBiasGyro = 9;
inline constexpr Eigen::Index kBiasAcc = 12;
inline constexpr Eigen::Index kCore = 15;

inline Eigen::Index calib(std::size_t i) { return kCore + 3 * static_cast<Eigen::Index>(i); }
inline Eigen::Index dim(std::size_t n_sensors) { return calib(n_sensors); }

/// Indices of the blocks with ground truth: (R, p, t_1 ... t_N).
std::vector<Eigen::Index> evaluated_indices(std::size_t n_sensors);

}  // namespace layout

}  // namespace equinav
