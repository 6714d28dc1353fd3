#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "equinav/types.hpp"

namespace equinav::eval {

enum class FilterKind { kEqf, kMekf };

std::string filter_name(FilterKind k);
FilterKind parse_filter(const std::string& name);

struct RunRow {
  double t = 0.0;
  NavState est;
  std::optional<NavState> truth;
  VecX P_diag;
  /// Covariance of the (R, p, t_1..t_N) blocks; empty if not stored.
  MatX P_eval;
  /// Cached NEES; NaN when unavailable.
  double nees = std::numeric_limits<double>::quiet_NaN();
  /// Quaternions as read from a run file, written back verbatim so that
  /// read/write cycles are byte-stable.
  std::optional<Eigen::Vector4d> est_q, truth_q;
};

struct RunRecord {
  FilterKind kind = FilterKind::kEqf;
  std::size_t num_sensors = 0;
  std::vector<RunRow> rows;
};

struct Summary {
  std::string filter;
  double rmse_pos = 0.0;               // m
  double rmse_att = 0.0;               // deg
  std::vector<double> rmse_calib;      // m, per sensor
  double nees_mean = 0.0;              // dimension-normalized
  double t0 = 0.0;                     // s
  std::vector<Vec3> final_calib;
  std::vector<double> final_calib_error;
  std::size_t samples = 0;
};

/// RMS of |p_hat - p| over rows with t >= t0. Throws std::domain_error on an
/// empty window.
double rmse_position(const RunRecord& run, double t0);
/// RMS of the geodesic attitude angle in degrees.
double rmse_attitude(const RunRecord& run, double t0);
std::vector<double> rmse_calibration(const RunRecord& run, double t0);

/// Error over the (R, p, t_i) blocks in the filter's own coordinates:
/// equivariant normal coordinates for the EqF, (dtheta, dp, dt) for the MEKF.
VecX evaluated_error(FilterKind kind, const NavState& est, const NavState& truth);

/// e^T P_sub^-1 e / dim; NaN if no truth. Throws std::domain_error on a
/// singular covariance.
double row_nees(FilterKind kind, const RunRow& row);

/// Per-row NEES, OpenMP-parallel over rows.
std::vector<double> nees_series(const RunRecord& run);
/// Serial reference for nees_series.
std::vector<double> nees_series_serial(const RunRecord& run);

struct Energy {
  std::vector<double> per_sample;  // rows with t >= t0
  double mean = std::numeric_limits<double>::quiet_NaN();
};
Energy filter_energy(const RunRecord& run, double t0);

Summary summarize(const RunRecord& run, double t0);

struct MetricVerdict {
  std::string metric;
  double eqf = 0.0;
  double mekf = 0.0;
  std::string best;  // "eqf", "mekf" or "tie"
};

struct Comparison {
  Summary eqf;
  Summary mekf;
  double t0 = 0.0;
  std::vector<MetricVerdict> verdicts;
};

/// Side-by-side summaries; throws ConfigError when the runs do not share
/// timestamps.
Comparison compare_runs(const RunRecord& eqf_run, const RunRecord& mekf_run, double t0);

/// Verdict for one metric; lower is better unless `closer_to_one`.
MetricVerdict verdict(const std::string& metric, double eqf, double mekf, bool closer_to_one = false);

}  // namespace equinav::eval
