#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "equinav/eval.hpp"
#include "equinav/runner.hpp"
#include "equinav/sim.hpp"

namespace equinav::mc {

struct MonteCarloConfig {
  sim::SimScenario scenario;
  std::vector<std::uint64_t> seeds;
  std::vector<eval::FilterKind> filters = {eval::FilterKind::kEqf, eval::FilterKind::kMekf};
  run::InitPolicy init;
  /// Filter settings; `kind` is overwritten per filter.
  run::RunOptions options;
  /// Start of the asymptotic phase; negative means duration - 20 s (>= 0).
  double t0 = -1.0;
  /// Time at which the attitude error is probed for the win-rate.
  double t_probe = 20.0;

  double resolved_t0() const;
  void validate() const;
};

struct FilterSeedResult {
  eval::FilterKind kind = eval::FilterKind::kEqf;
  eval::Summary summary;
  double att_err_probe_deg = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::vector<FilterSeedResult> per_filter;  // in MonteCarloConfig::filters order
};

run::Dataset dataset_from_sim(const sim::SimData& data);

/// Simulate one seed and run every configured filter on it.
SeedResult run_seed(const MonteCarloConfig& cfg, std::uint64_t seed);

/// Serial reference over all seeds.
std::vector<SeedResult> run_serial(const MonteCarloConfig& cfg);
/// Seeds fanned out over OpenMP threads (dynamic schedule), capped by
/// `max_threads` (0 means EQUINAV_THREADS or the OpenMP default).
std::vector<SeedResult> run_parallel(const MonteCarloConfig& cfg, int max_threads = 0);

/// EQUINAV_THREADS if set to a positive integer, else 0.
int env_thread_cap();

struct Stats {
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

/// Linear-interpolation percentile, q in [0, 1]. Throws on an empty sample.
double percentile(std::vector<double> xs, double q);
Stats stats_of(const std::vector<double>& xs);

struct FilterAggregate {
  eval::FilterKind kind = eval::FilterKind::kEqf;
  Stats rmse_pos, rmse_att, nees_mean, att_err_probe_deg;
  std::vector<Stats> final_calib_error;
};

struct WinRate {
  std::string metric;
  std::string description;
  std::size_t eqf_wins = 0;
  std::size_t total = 0;
  double fraction = 0.0;
};

struct Aggregate {
  std::size_t seeds_total = 0;
  std::size_t seeds_failed = 0;
  std::vector<FilterAggregate> filters;
  std::vector<WinRate> win_rates;  // only when both filters ran
};

Aggregate aggregate(const MonteCarloConfig& cfg, const std::vector<SeedResult>& results);

}  // namespace equinav::mc
