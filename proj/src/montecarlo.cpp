#include "equinav/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace equinav::mc {

double MonteCarloConfig::resolved_t0() const {
  return t0 >= 0.0 ? t0 : std::max(0.0, scenario.duration - 20.0);
}

void MonteCarloConfig::validate() const {
  scenario.validate();
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (filters.empty()) throw ConfigError("at least one filter is required");
  if (resolved_t0() >= scenario.duration) throw ConfigError("t0 must precede the scenario end");
}

run::Dataset dataset_from_sim(const sim::SimData& data) {
  run::Dataset ds;
  ds.imu = data.imu;
  ds.gnss = data.gnss;
  ds.truth.reserve(data.truth.size());
  for (const auto& s : data.truth) {
    ds.truth.push_back({s.t, sim::to_nav_state(s, data.scenario.lever_arms)});
  }
  return ds;
}

SeedResult run_seed(const MonteCarloConfig& cfg, std::uint64_t seed) {
  SeedResult res;
  res.seed = seed;
  try {
    sim::SimScenario sc = cfg.scenario;
    sc.seed = seed;
    const sim::SimData data = sim::simulate(sc);
    const run::Dataset ds = dataset_from_sim(data);
    const NavState x0 =
        run::make_initial_state(cfg.init, ds.truth.front().state, sc.num_sensors());
    for (const auto kind : cfg.filters) {
      run::RunOptions opts = cfg.options;
      opts.kind = kind;
      const run::RunResult rr = run::run_filter(ds, opts, x0);
      FilterSeedResult fr;
      fr.kind = kind;
      fr.summary = eval::summarize(rr.record, cfg.resolved_t0());
      const auto& rows = rr.record.rows;
      const auto it = std::min_element(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
        return std::abs(a.t - cfg.t_probe) < std::abs(b.t - cfg.t_probe);
      });
      fr.att_err_probe_deg = so3::angle_between(it->est.R.matrix(), it->truth->R.matrix()) *
                             (180.0 / std::numbers::pi);
      res.per_filter.push_back(std::move(fr));
    }
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
    res.per_filter.clear();
  }
  return res;
}

std::vector<SeedResult> run_serial(const MonteCarloConfig& cfg) {
  cfg.validate();
  std::vector<SeedResult> out;
  out.reserve(cfg.seeds.size());
  for (const auto seed : cfg.seeds) out.push_back(run_seed(cfg, seed));
  return out;
}

int env_thread_cap() {
  const char* v = std::getenv("EQUINAV_THREADS");
  if (v == nullptr) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  return (end != v && *end == '\0' && n > 0) ? static_cast<int>(n) : 0;
}

std::vector<SeedResult> run_parallel(const MonteCarloConfig& cfg, int max_threads) {
  cfg.validate();
  std::vector<SeedResult> out(cfg.seeds.size());
  const auto n = static_cast<std::ptrdiff_t>(cfg.seeds.size());
  int threads = max_threads > 0 ? max_threads : env_thread_cap();
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  threads = 1;
#endif
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = run_seed(cfg, cfg.seeds[k]);
  return out;
}

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::domain_error("percentile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

Stats stats_of(const std::vector<double>& xs) {
  std::vector<double> finite;
  for (double x : xs) {
    if (std::isfinite(x)) finite.push_back(x);
  }
  if (finite.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  return {percentile(finite, 0.5), percentile(finite, 0.1), percentile(finite, 0.9)};
}

Aggregate aggregate(const MonteCarloConfig& cfg, const std::vector<SeedResult>& results) {
  Aggregate agg;
  agg.seeds_total = results.size();
  for (const auto& r : results) agg.seeds_failed += r.ok ? 0 : 1;

  const std::size_t n_sensors = cfg.scenario.num_sensors();
  for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
    std::vector<double> pos, att, nees, probe;
    std::vector<std::vector<double>> calib(n_sensors);
    for (const auto& r : results) {
      if (!r.ok) continue;
      const FilterSeedResult& fr = r.per_filter[f];
      pos.push_back(fr.summary.rmse_pos);
      att.push_back(fr.summary.rmse_att);
      nees.push_back(fr.summary.nees_mean);
      probe.push_back(fr.att_err_probe_deg);
      for (std::size_t i = 0; i < n_sensors; ++i) calib[i].push_back(fr.summary.final_calib_error[i]);
    }
    FilterAggregate fa;
    fa.kind = cfg.filters[f];
    fa.rmse_pos = stats_of(pos);
    fa.rmse_att = stats_of(att);
    fa.nees_mean = stats_of(nees);
    fa.att_err_probe_deg = stats_of(probe);
    for (const auto& c : calib) fa.final_calib_error.push_back(stats_of(c));
    agg.filters.push_back(std::move(fa));
  }

  const auto eqf_it = std::find(cfg.filters.begin(), cfg.filters.end(), eval::FilterKind::kEqf);
  const auto mekf_it = std::find(cfg.filters.begin(), cfg.filters.end(), eval::FilterKind::kMekf);
  if (eqf_it == cfg.filters.end() || mekf_it == cfg.filters.end()) return agg;
  const auto ie = static_cast<std::size_t>(eqf_it - cfg.filters.begin());
  const auto im = static_cast<std::size_t>(mekf_it - cfg.filters.begin());

  auto win = [&](std::string metric, std::string description, auto&& value) {
    WinRate w{std::move(metric), std::move(description), 0, 0, 0.0};
    for (const auto& r : results) {
      if (!r.ok) continue;
      ++w.total;
      w.eqf_wins += value(r.per_filter[ie]) < value(r.per_filter[im]) ? 1 : 0;
    }
    if (w.total > 0) w.fraction = static_cast<double>(w.eqf_wins) / static_cast<double>(w.total);
    agg.win_rates.push_back(std::move(w));
  };
  char probe_desc[96];
  std::snprintf(probe_desc, sizeof probe_desc, "EqF attitude error at t=%g s lower than MEKF",
                cfg.t_probe);
  win("att_err_probe", probe_desc, [](const FilterSeedResult& f) { return f.att_err_probe_deg; });
  win("rmse_pos", "EqF asymptotic position RMSE lower than MEKF",
      [](const FilterSeedResult& f) { return f.summary.rmse_pos; });
  win("rmse_att", "EqF asymptotic attitude RMSE lower than MEKF",
      [](const FilterSeedResult& f) { return f.summary.rmse_att; });
  return agg;
}

}  // namespace equinav::mc
