#include <benchmark/benchmark.h>

#include "equinav/eval.hpp"
#include "equinav/montecarlo.hpp"

using namespace equinav;

namespace {

mc::MonteCarloConfig mc_config(std::size_t seeds) {
  mc::MonteCarloConfig cfg;
  cfg.scenario.profile = sim::Profile::kFigure8;
  cfg.scenario.duration = 10.0;
  cfg.t_probe = 5.0;
  for (std::size_t s = 0; s < seeds; ++s) cfg.seeds.push_back(s);
  cfg.init.base = run::InitPolicy::Base::kTruth;
  cfg.options.cfg.p0_diag = make_p0_diag(PriorStd{}, 2);
  cfg.options.store_eval_cov = false;
  return cfg;
}

const eval::RunRecord& nees_record() {
  static const eval::RunRecord rec = [] {
    sim::SimScenario sc;
    sc.duration = 60.0;
    const auto data = mc::dataset_from_sim(sim::simulate(sc));
    run::RunOptions opts;
    opts.cfg.p0_diag = make_p0_diag(PriorStd{}, 2);
    eval::RunRecord r = run::run_filter(data, opts, data.truth.front().state).record;
    for (auto& row : r.rows) row.nees = std::numeric_limits<double>::quiet_NaN();
    return r;
  }();
  return rec;
}

void BM_MonteCarloSerial(benchmark::State& state) {
  const auto cfg = mc_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mc::run_serial(cfg));
}

void BM_MonteCarloParallel(benchmark::State& state) {
  const auto cfg = mc_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mc::run_parallel(cfg));
}

void BM_NeesSerial(benchmark::State& state) {
  const auto& rec = nees_record();
  for (auto _ : state) benchmark::DoNotOptimize(eval::nees_series_serial(rec));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rec.rows.size()));
}

void BM_NeesParallel(benchmark::State& state) {
  const auto& rec = nees_record();
  for (auto _ : state) benchmark::DoNotOptimize(eval::nees_series(rec));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rec.rows.size()));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloParallel)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_NeesSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_NeesParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
