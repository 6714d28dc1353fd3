#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "equinav/eval.hpp"
#include "equinav/montecarlo.hpp"
#include "equinav/runner.hpp"
#include "equinav/sim.hpp"

namespace equinav::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Malformed or missing data files; messages carry file and line numbers.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest representation that parses back to the same double.
std::string format_double(double x);

/// Header plus numeric rows; line numbers are 1-based with the header on line 1.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;
};

CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const CsvTable& table);

// imu.csv: t,wx,wy,wz,ax,ay,az
std::vector<ImuSample> read_imu(const fs::path& path);
void write_imu(const fs::path& path, const std::vector<ImuSample>& imu);

struct GnssStream {
  std::vector<GnssSample> samples;
  bool has_variance = false;
  std::vector<std::string> warnings;  // out-of-order rows that were dropped
};

// gnss_<i>.csv: t,x,y,z[,sxx,syy,szz]
GnssStream read_gnss(const fs::path& path, std::size_t sensor);
void write_gnss(const fs::path& path, const std::vector<GnssSample>& samples,
                bool with_variance = false);

// truth.csv: t,qw,qx,qy,qz,px,py,pz,vx,vy,vz
struct TruthRecord {
  double t = 0.0;
  Eigen::Vector4d q = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};
std::vector<TruthRecord> read_truth(const fs::path& path);
void write_truth(const fs::path& path, const std::vector<TruthRecord>& rows);
TruthRecord truth_record(double t, const NavState& x);
/// Quaternions within 1e-6 of unit norm are normalized; others are rejected.
std::vector<run::TruthRow> to_truth_rows(const std::vector<TruthRecord>& rows,
                                         const std::vector<Vec3>& lever_arms,
                                         const Vec3& b_gyro, const Vec3& b_acc);

json scenario_to_json(const sim::SimScenario& sc);
/// Missing keys take their defaults; unknown keys are rejected.
sim::SimScenario scenario_from_json(const json& j);
/// A profile name or the path of a scenario JSON file.
sim::SimScenario load_scenario(const std::string& name_or_path);

/// Writes imu.csv, gnss_<i>.csv (1-based), truth.csv and scenario.json.
void write_sim(const fs::path& dir, const sim::SimData& data);

struct LoadedDataset {
  run::Dataset data;
  std::optional<sim::SimScenario> scenario;
  std::vector<std::string> warnings;
};
/// Reads a directory written by write_sim (truth.csv and scenario.json optional).
LoadedDataset load_dataset(const fs::path& dir);

/// Settings consumed by the `run` command.
struct RunConfig {
  NoiseConfig noise;
  PriorStd prior;
  double gnss_sigma = 0.05;
  run::InitPolicy init;
  std::optional<double> t0;  // default: last 20 s of the run
  std::size_t record_stride = 1;
  eqf::Options eqf;
  mekf::Options mekf;

  run::RunOptions options(eval::FilterKind kind, std::size_t n_sensors) const;
};

json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const fs::path& path);

/// Estimate, truth (if any), covariance diagonal and NEES per row.
void write_run(const fs::path& path, const eval::RunRecord& run);
/// The filter kind is not stored in the CSV and must be supplied.
eval::RunRecord read_run(const fs::path& path, eval::FilterKind kind);

json summary_to_json(const eval::Summary& s);
json comparison_to_json(const eval::Comparison& c);
std::string comparison_table(const eval::Comparison& c);

json montecarlo_to_json(const mc::MonteCarloConfig& cfg, const std::vector<mc::SeedResult>& seeds,
                        const mc::Aggregate& agg);
std::string montecarlo_table(const mc::Aggregate& agg);

json read_json(const fs::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const fs::path& path, const json& j);

}  // namespace equinav::io
