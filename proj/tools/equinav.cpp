#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "equinav/io.hpp"
#include "equinav/montecarlo.hpp"
#include "equinav/runner.hpp"
#include "equinav/sim.hpp"

namespace {

using namespace equinav;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  // "0-24", "1,2,5" or a mix such as "0-4,10".
  std::vector<std::uint64_t> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash));
        const auto hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("bad seed range '" + part + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed list '" + spec + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

std::vector<eval::FilterKind> parse_filters(const std::string& f) {
  if (f == "both") return {eval::FilterKind::kEqf, eval::FilterKind::kMekf};
  return {eval::parse_filter(f)};
}

double default_t0(const eval::RunRecord& r) { return std::max(0.0, r.rows.back().t - 20.0); }

void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw io::DataError(d.string() + ": cannot create directory: " + ec.message());
}

int cmd_simulate(const std::string& scenario, const std::string& out,
                 std::optional<std::uint64_t> seed, std::optional<double> duration) {
  sim::SimScenario sc = io::load_scenario(scenario);
  if (seed) sc.seed = *seed;
  if (duration) sc.duration = *duration;
  const sim::SimData data = sim::simulate(sc);
  io::write_sim(out, data);
  std::printf("wrote %zu IMU rows, %zu GNSS streams to %s\n", data.imu.size(), data.gnss.size(),
              out.c_str());
  return kOk;
}

int cmd_run(const std::string& filter, const std::string& data_dir, const std::string& config,
            const std::string& out) {
  const io::RunConfig cfg = config.empty() ? io::RunConfig{} : io::load_run_config(config);
  const auto kinds = parse_filters(filter);
  io::LoadedDataset ds = io::load_dataset(data_dir);
  for (const auto& w : ds.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::optional<NavState> truth0;
  if (!ds.data.truth.empty()) truth0 = ds.data.truth.front().state;
  const NavState x0 = run::make_initial_state(cfg.init, truth0, ds.data.num_sensors());
  const bool both = kinds.size() > 1;

  std::map<eval::FilterKind, eval::RunRecord> records;
  for (const auto kind : kinds) {
    const run::RunResult rr = run::run_filter(ds.data, cfg.options(kind, ds.data.num_sensors()), x0);
    for (const auto& w : rr.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    const fs::path dir = both ? fs::path(out) / eval::filter_name(kind) : fs::path(out);
    ensure_dir(dir);
    io::write_run(dir / "run.csv", rr.record);
    if (!ds.data.truth.empty()) {
      const double t0 = cfg.t0.value_or(default_t0(rr.record));
      io::json s = io::summary_to_json(eval::summarize(rr.record, t0));
      s["updates_accepted"] = rr.updates_accepted;
      s["updates_rejected"] = rr.updates_rejected;
      s["gnss_dropped"] = rr.gnss_dropped;
      io::write_json(dir / "summary.json", s);
      std::printf("%s: rmse_pos %.4f m, rmse_att %.4f deg, nees %.3f\n",
                  eval::filter_name(kind).c_str(), s["rmse_pos"].get<double>(),
                  s["rmse_att"].get<double>(),
                  s["nees_mean"].is_number() ? s["nees_mean"].get<double>() : NAN);
    } else {
      std::fprintf(stderr, "warning: no truth.csv; summary.json not written\n");
    }
    records.emplace(kind, rr.record);
  }
  if (both && !ds.data.truth.empty()) {
    const auto& e = records.at(eval::FilterKind::kEqf);
    const eval::Comparison c =
        eval::compare_runs(e, records.at(eval::FilterKind::kMekf), cfg.t0.value_or(default_t0(e)));
    io::write_json(fs::path(out) / "compare.json", io::comparison_to_json(c));
    std::fputs(io::comparison_table(c).c_str(), stdout);
  }
  return kOk;
}

eval::FilterKind infer_kind(const fs::path& run_csv, std::optional<double>& t0_hint) {
  const fs::path summary = run_csv.parent_path() / "summary.json";
  if (fs::exists(summary)) {
    const io::json s = io::read_json(summary);
    if (s.contains("t0") && s["t0"].is_number() && !t0_hint) t0_hint = s["t0"].get<double>();
    if (s.contains("filter") && s["filter"].is_string()) {
      return eval::parse_filter(s["filter"].get<std::string>());
    }
  }
  const std::string dir = run_csv.parent_path().filename().string();
  if (dir == "eqf" || dir == "mekf") return eval::parse_filter(dir);
  throw ConfigError(run_csv.string() + ": cannot tell which filter produced this run");
}

int cmd_compare(const std::vector<std::string>& runs, std::optional<double> t0,
                const std::string& out) {
  if (runs.size() < 2) throw ConfigError("compare needs at least two run files");
  std::optional<double> t0_hint;
  std::optional<eval::RunRecord> eqf_run, mekf_run;
  for (const auto& r : runs) {
    const eval::FilterKind kind = infer_kind(r, t0_hint);
    auto& slot = kind == eval::FilterKind::kEqf ? eqf_run : mekf_run;
    if (slot) throw ConfigError("compare: more than one " + eval::filter_name(kind) + " run given");
    slot = io::read_run(r, kind);
  }
  if (!eqf_run || !mekf_run) throw ConfigError("compare needs one eqf and one mekf run");
  const double t = t0 ? *t0 : t0_hint.value_or(default_t0(*eqf_run));
  const eval::Comparison c = eval::compare_runs(*eqf_run, *mekf_run, t);
  std::fputs(io::comparison_table(c).c_str(), stdout);
  if (!out.empty()) io::write_json(out, io::comparison_to_json(c));
  return kOk;
}

int cmd_montecarlo(const std::string& scenario, const std::string& seeds, const std::string& filter,
                   std::optional<double> yaw_deg, const std::string& config, const std::string& out,
                   double t_probe, std::optional<double> duration, bool serial) {
  mc::MonteCarloConfig cfg;
  cfg.scenario = io::load_scenario(scenario);
  if (duration) cfg.scenario.duration = *duration;
  cfg.seeds = parse_seeds(seeds);
  cfg.filters = parse_filters(filter);
  const io::RunConfig rc = config.empty() ? io::RunConfig{} : io::load_run_config(config);
  cfg.options = rc.options(eval::FilterKind::kEqf, cfg.scenario.num_sensors());
  cfg.init = rc.init;
  if (config.empty()) {
    // Protocol default: true pose, zero biases, zero lever arms.
    cfg.init.base = run::InitPolicy::Base::kTruth;
    cfg.init.calib = std::vector<Vec3>(cfg.scenario.num_sensors(), Vec3::Zero());
  }
  if (yaw_deg) cfg.init.attitude_error_deg.z() = *yaw_deg;
  if (rc.t0) cfg.t0 = *rc.t0;
  cfg.t_probe = t_probe;

  const auto results = serial ? mc::run_serial(cfg) : mc::run_parallel(cfg);
  const mc::Aggregate agg = mc::aggregate(cfg, results);
  if (!out.empty()) {
    for (const auto& r : results) {
      if (!r.ok) continue;
      const fs::path dir = fs::path(out) / ("seed_" + std::to_string(r.seed));
      ensure_dir(dir);
      for (const auto& f : r.per_filter) {
        io::json s = io::summary_to_json(f.summary);
        s["att_err_probe_deg"] = f.att_err_probe_deg;
        io::write_json(dir / ("summary_" + eval::filter_name(f.kind) + ".json"), s);
      }
    }
    io::write_json(fs::path(out) / "montecarlo.json", io::montecarlo_to_json(cfg, results, agg));
  }
  std::fputs(io::montecarlo_table(agg).c_str(), stdout);
  for (const auto& r : results) {
    if (!r.ok) std::fprintf(stderr, "seed %llu failed: %s\n",
                            static_cast<unsigned long long>(r.seed), r.error.c_str());
  }
  return agg.seeds_failed > 0 ? kNumerical : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant and multiplicative INS filters with GNSS lever-arm calibration"};
  app.require_subcommand(1);
  if (const int cap = mc::env_thread_cap(); cap > 0) omp_set_num_threads(cap);

  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_scenario = "figure8", sim_out;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> sim_duration;
  sim_cmd->add_option("--scenario", sim_scenario, "Profile name or scenario JSON file");
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();
  sim_cmd->add_option("--seed", sim_seed, "Random seed");
  sim_cmd->add_option("--duration", sim_duration, "Duration override [s]");

  auto* run_cmd = app.add_subcommand("run", "Run a filter over a dataset");
  std::string run_filter = "eqf", run_data, run_config, run_out;
  run_cmd->add_option("--filter", run_filter, "eqf, mekf or both")
      ->check(CLI::IsMember({"eqf", "mekf", "both"}));
  run_cmd->add_option("--data", run_data, "Dataset directory")->required();
  run_cmd->add_option("--config", run_config, "Run configuration JSON");
  run_cmd->add_option("--out", run_out, "Output directory")->required();

  auto* cmp_cmd = app.add_subcommand("compare", "Compare an EqF and an MEKF run");
  std::vector<std::string> cmp_runs;
  std::optional<double> cmp_t0;
  std::string cmp_out;
  cmp_cmd->add_option("--runs", cmp_runs, "run.csv files")->required();
  cmp_cmd->add_option("--t0", cmp_t0, "Start of the asymptotic phase [s]");
  cmp_cmd->add_option("--out", cmp_out, "Write the comparison JSON here");

  auto* mc_cmd = app.add_subcommand("montecarlo", "Monte-Carlo over seeds");
  std::string mc_scenario = "figure8", mc_seeds = "0-24", mc_filter = "both", mc_config, mc_out;
  std::optional<double> mc_yaw, mc_duration;
  double mc_probe = 20.0;
  bool mc_serial = false;
  mc_cmd->add_option("--scenario", mc_scenario, "Profile name or scenario JSON file");
  mc_cmd->add_option("--seeds", mc_seeds, "Seed list, e.g. 0-24 or 1,2,3");
  mc_cmd->add_option("--filter", mc_filter, "eqf, mekf or both")
      ->check(CLI::IsMember({"eqf", "mekf", "both"}));
  mc_cmd->add_option("--attitude-error-deg", mc_yaw, "Initial yaw error [deg]");
  mc_cmd->add_option("--config", mc_config, "Run configuration JSON");
  mc_cmd->add_option("--out", mc_out, "Output directory");
  mc_cmd->add_option("--t-probe", mc_probe, "Time of the attitude-error probe [s]");
  mc_cmd->add_option("--duration", mc_duration, "Duration override [s]");
  mc_cmd->add_flag("--serial", mc_serial, "Disable the parallel seed fan-out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim_scenario, sim_out, sim_seed, sim_duration);
    if (run_cmd->parsed()) return cmd_run(run_filter, run_data, run_config, run_out);
    if (cmp_cmd->parsed()) return cmd_compare(cmp_runs, cmp_t0, cmp_out);
    if (mc_cmd->parsed()) {
      return cmd_montecarlo(mc_scenario, mc_seeds, mc_filter, mc_yaw, mc_config, mc_out, mc_probe,
                            mc_duration, mc_serial);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const io::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const run::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}
