#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "equinav/eqf.hpp"
#include "equinav/eval.hpp"
#include "equinav/mekf.hpp"
#include "equinav/types.hpp"

namespace equinav::run {

/// Non-finite covariance or state during a run.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class UpdateResult { kAccepted, kRejected };

/// Common interface so the driver can feed either filter the same streams.
class NavFilter {
 public:
  virtual ~NavFilter() = default;
  virtual eval::FilterKind kind() const = 0;
  virtual void propagate(const InputSegment& u, double dt) = 0;
  virtual UpdateResult update(std::size_t sensor, const Vec3& y, const Mat3& R_meas) = 0;
  virtual NavState estimate() const = 0;
  virtual const MatX& covariance() const = 0;
  virtual double time() const = 0;
  virtual void set_time(double t) = 0;
};

class EqfFilter final : public NavFilter {
 public:
  EqfFilter(const NavState& x0, const NoiseConfig& cfg, const eqf::Options& opts);
  eval::FilterKind kind() const override { return eval::FilterKind::kEqf; }
  void propagate(const InputSegment& u, double dt) override;
  UpdateResult update(std::size_t sensor, const Vec3& y, const Mat3& R_meas) override;
  NavState estimate() const override { return eqf::state_estimate(fs_); }
  const MatX& covariance() const override { return fs_.P; }
  double time() const override { return fs_.t_last; }
  void set_time(double t) override { fs_.t_last = t; }
  const eqf::FilterState& state() const { return fs_; }

 private:
  eqf::FilterState fs_;
};

class MekfFilter final : public NavFilter {
 public:
  MekfFilter(const NavState& x0, const NoiseConfig& cfg, const mekf::Options& opts);
  eval::FilterKind kind() const override { return eval::FilterKind::kMekf; }
  void propagate(const InputSegment& u, double dt) override;
  UpdateResult update(std::size_t sensor, const Vec3& y, const Mat3& R_meas) override;
  NavState estimate() const override { return ms_.nominal; }
  const MatX& covariance() const override { return ms_.P; }
  double time() const override { return ms_.t_last; }
  void set_time(double t) override { ms_.t_last = t; }
  const mekf::MekfState& state() const { return ms_; }

 private:
  mekf::MekfState ms_;
};

struct TruthRow {
  double t = 0.0;
  NavState state;
};

/// Sensor streams of one recording; truth and lever arms are optional.
struct Dataset {
  std::vector<ImuSample> imu;
  std::vector<std::vector<GnssSample>> gnss;  // one stream per sensor
  std::vector<TruthRow> truth;
  std::size_t num_sensors() const { return gnss.size(); }
};

/// Initial estimate: origin or truth, optionally perturbed.
struct InitPolicy {
  enum class Base { kOrigin, kTruth };
  Base base = Base::kOrigin;
  /// Roll, pitch, yaw perturbation applied as R0 Rz(yaw) Ry(pitch) Rx(roll).
  Vec3 attitude_error_deg = Vec3::Zero();
  /// Overrides the lever-arm initialization when set.
  std::optional<std::vector<Vec3>> calib;
  /// With a truth base, start the biases at their true values instead of zero.
  bool truth_biases = false;
  /// Relative error on truth-based vectors (v, p, biases, lever arms), plus
  /// an extra rotation of this many radians about z.
  double relative_error = 0.0;
};

/// IMU input at time t inside interval [imu[k].t, imu[k+1].t], by cubic
/// interpolation through the samples k-1 ... k+2 (fewer near the ends).
ImuInput interpolate_input(const std::vector<ImuSample>& imu, std::size_t k, double t);

NavState make_initial_state(const InitPolicy& policy, const std::optional<NavState>& truth0,
                            std::size_t n_sensors);

struct RunOptions {
  eval::FilterKind kind = eval::FilterKind::kEqf;
  /// An empty p0_diag is filled from the default PriorStd.
  NoiseConfig cfg;
  eqf::Options eqf_opts;
  mekf::Options mekf_opts;
  /// Default per-axis GNSS standard deviation when a sample carries none.
  double gnss_sigma = 0.05;
  /// Record every k-th IMU sample.
  std::size_t record_stride = 1;
  /// Store the evaluated covariance sub-block per row (needed for NEES).
  bool store_eval_cov = true;
};

struct RunResult {
  eval::RunRecord record;
  std::size_t updates_accepted = 0;
  std::size_t updates_rejected = 0;
  std::size_t gnss_dropped = 0;
  std::vector<std::string> warnings;
};

std::unique_ptr<NavFilter> make_filter(const RunOptions& opts, const NavState& x0);

/// Feeds the IMU intervals and GNSS samples to the filter in time order.
/// GNSS samples falling inside an IMU interval split it, with the input
/// interpolated by interpolate_input; at equal timestamps the IMU propagation
/// comes first.
/// GNSS samples outside the IMU time span are dropped with a warning.
RunResult run_filter(const Dataset& data, const RunOptions& opts, const NavState& x0);

/// Truth row nearest to t if within `tol`.
const TruthRow* nearest_truth(const std::vector<TruthRow>& truth, double t, double tol);

}  // namespace equinav::run
