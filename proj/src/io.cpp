#include "equinav/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace equinav::io {
namespace {

const std::vector<std::string> kImuHeader = {"t", "wx", "wy", "wz", "ax", "ay", "az"};
const std::vector<std::string> kGnssHeader = {"t", "x", "y", "z"};
const std::vector<std::string> kGnssVarHeader = {"t", "x", "y", "z", "sxx", "syy", "szz"};
const std::vector<std::string> kTruthHeader = {"t",  "qw", "qx", "qy", "qz", "px",
                                               "py", "pz", "vx", "vy", "vz"};

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + xs[k];
  return out;
}

void expect_header(const fs::path& path, const CsvTable& t, const std::vector<std::string>& h) {
  if (t.header != h) {
    throw DataError(where(path, 1) + "expected header '" + join(h) + "', got '" +
                    join(t.header) + "'");
  }
}

void expect_finite(const fs::path& path, const CsvTable& t) {
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      if (!std::isfinite(t.rows[r][c])) {
        throw DataError(where(path, t.lines[r]) + "non-finite value in column '" + t.header[c] +
                        "'");
      }
    }
  }
}

Vec3 vec3_at(const std::vector<double>& row, std::size_t c) { return {row[c], row[c + 1], row[c + 2]}; }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(ctx + ": unknown key '" + k + "'");
  }
}

template <class T>
void get_to(const json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(ctx + "." + key + ": wrong type");
  }
}

Vec3 vec3_from(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(ctx + ": expected an array of 3 numbers");
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw ConfigError(ctx + ": expected an array of 3 numbers");
    v[a] = j[a].get<double>();
  }
  return v;
}

void get_vec3(const json& j, const char* key, Vec3& out, const std::string& ctx) {
  if (j.contains(key)) out = vec3_from(j.at(key), ctx + "." + key);
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const std::vector<Vec3>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(to_json(v));
  return a;
}

std::vector<Vec3> vec3_list_from(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw ConfigError(ctx + ": expected an array of 3-vectors");
  std::vector<Vec3> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    out.push_back(vec3_from(j[k], ctx + "[" + std::to_string(k) + "]"));
  }
  return out;
}

json noise_to_json(const NoiseConfig& n) {
  return {{"sigma_gyro", n.sigma_gyro},       {"sigma_acc", n.sigma_acc},
          {"sigma_bg_walk", n.sigma_bg_walk}, {"sigma_ba_walk", n.sigma_ba_walk},
          {"sigma_calib_walk", n.sigma_calib_walk}, {"gravity", to_json(n.gravity)}};
}

NoiseConfig noise_from_json(const json& j, NoiseConfig n, const std::string& ctx) {
  check_keys(j, {"sigma_gyro", "sigma_acc", "sigma_bg_walk", "sigma_ba_walk", "sigma_calib_walk",
                 "gravity"},
             ctx);
  get_to(j, "sigma_gyro", n.sigma_gyro, ctx);
  get_to(j, "sigma_acc", n.sigma_acc, ctx);
  get_to(j, "sigma_bg_walk", n.sigma_bg_walk, ctx);
  get_to(j, "sigma_ba_walk", n.sigma_ba_walk, ctx);
  get_to(j, "sigma_calib_walk", n.sigma_calib_walk, ctx);
  get_vec3(j, "gravity", n.gravity, ctx);
  for (double s : {n.sigma_gyro, n.sigma_acc, n.sigma_bg_walk, n.sigma_ba_walk, n.sigma_calib_walk}) {
    if (!(s >= 0.0)) throw ConfigError(ctx + ": noise densities must be >= 0");
  }
  return n;
}

std::vector<std::string> run_header(std::size_t n, bool has_truth) {
  std::vector<std::string> h = {"t",  "qw", "qx", "qy", "qz",  "px",  "py",  "pz",  "vx",
                                "vy", "vz", "bgx", "bgy", "bgz", "bax", "bay", "baz"};
  auto add_calib = [&](const std::string& prefix) {
    for (std::size_t i = 0; i < n; ++i) {
      for (const char* a : {"x", "y", "z"}) h.push_back(prefix + "t" + std::to_string(i + 1) + a);
    }
  };
  add_calib("");
  if (has_truth) {
    for (const char* c : {"qw", "qx", "qy", "qz", "px", "py", "pz", "vx", "vy", "vz"}) {
      h.push_back(std::string("gt_") + c);
    }
    add_calib("gt_");
  }
  for (Eigen::Index k = 0; k < layout::dim(n); ++k) h.push_back("P" + std::to_string(k));
  h.push_back("nees");
  return h;
}

std::string fixed(double x, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  auto split = [](std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      out.push_back(s.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  };
  if (!std::getline(in, line)) throw DataError(where(path, 1) + "missing header row");
  ++lineno;
  t.header = split(line);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw DataError(where(path, lineno) + "expected " + std::to_string(t.header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      const auto r = std::from_chars(f.data(), f.data() + f.size(), row[c]);
      if (f.empty() || r.ec != std::errc() || r.ptr != f.data() + f.size()) {
        throw DataError(where(path, lineno) + "column '" + t.header[c] + "': invalid number '" +
                        f + "'");
      }
    }
    t.rows.push_back(std::move(row));
    t.lines.push_back(lineno);
  }
  return t;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << join(table.header) << '\n';
  std::string buf;
  for (const auto& row : table.rows) {
    buf.clear();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) buf += ',';
      buf += format_double(row[c]);
    }
    buf += '\n';
    out << buf;
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

std::vector<ImuSample> read_imu(const fs::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(path, t, kImuHeader);
  expect_finite(path, t);
  std::vector<ImuSample> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!out.empty() && !(row[0] > out.back().t)) {
      throw DataError(where(path, t.lines[r]) + "IMU timestamps must be strictly increasing");
    }
    out.push_back({row[0], vec3_at(row, 1), vec3_at(row, 4)});
  }
  if (out.size() < 2) throw DataError(path.string() + ": at least two IMU rows are required");
  return out;
}

void write_imu(const fs::path& path, const std::vector<ImuSample>& imu) {
  CsvTable t;
  t.header = kImuHeader;
  for (const auto& s : imu) {
    t.rows.push_back({s.t, s.gyro.x(), s.gyro.y(), s.gyro.z(), s.acc.x(), s.acc.y(), s.acc.z()});
  }
  write_csv(path, t);
}

GnssStream read_gnss(const fs::path& path, std::size_t sensor) {
  const CsvTable t = read_csv(path);
  GnssStream out;
  if (t.header == kGnssVarHeader) {
    out.has_variance = true;
  } else {
    expect_header(path, t, kGnssHeader);
  }
  expect_finite(path, t);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!out.samples.empty() && !(row[0] > out.samples.back().t)) {
      out.warnings.push_back(where(path, t.lines[r]) + "out-of-order GNSS row dropped");
      continue;
    }
    GnssSample g;
    g.t = row[0];
    g.sensor = sensor;
    g.pos = vec3_at(row, 1);
    if (out.has_variance) g.var = vec3_at(row, 4);
    out.samples.push_back(g);
  }
  return out;
}

void write_gnss(const fs::path& path, const std::vector<GnssSample>& samples, bool with_variance) {
  CsvTable t;
  t.header = with_variance ? kGnssVarHeader : kGnssHeader;
  for (const auto& g : samples) {
    std::vector<double> row = {g.t, g.pos.x(), g.pos.y(), g.pos.z()};
    if (with_variance) row.insert(row.end(), {g.var.x(), g.var.y(), g.var.z()});
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

std::vector<TruthRecord> read_truth(const fs::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(path, t, kTruthHeader);
  expect_finite(path, t);
  std::vector<TruthRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!out.empty() && !(row[0] > out.back().t)) {
      throw DataError(where(path, t.lines[r]) + "truth timestamps must be strictly increasing");
    }
    TruthRecord rec;
    rec.t = row[0];
    rec.q = {row[1], row[2], row[3], row[4]};
    if (!(std::abs(rec.q.norm() - 1.0) < 1e-6)) {
      throw DataError(where(path, t.lines[r]) + "quaternion is not unit length");
    }
    rec.p = vec3_at(row, 5);
    rec.v = vec3_at(row, 8);
    out.push_back(rec);
  }
  return out;
}

void write_truth(const fs::path& path, const std::vector<TruthRecord>& rows) {
  CsvTable t;
  t.header = kTruthHeader;
  for (const auto& r : rows) {
    t.rows.push_back({r.t, r.q[0], r.q[1], r.q[2], r.q[3], r.p.x(), r.p.y(), r.p.z(), r.v.x(),
                      r.v.y(), r.v.z()});
  }
  write_csv(path, t);
}

TruthRecord truth_record(double t, const NavState& x) { return {t, x.R.quaternion(), x.p, x.v}; }

std::vector<run::TruthRow> to_truth_rows(const std::vector<TruthRecord>& rows,
                                         const std::vector<Vec3>& lever_arms,
                                         const Vec3& b_gyro, const Vec3& b_acc) {
  std::vector<run::TruthRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    run::TruthRow tr;
    tr.t = r.t;
    tr.state.R = Rot3::from_quaternion(r.q[0], r.q[1], r.q[2], r.q[3]);
    tr.state.p = r.p;
    tr.state.v = r.v;
    tr.state.b_gyro = b_gyro;
    tr.state.b_acc = b_acc;
    tr.state.calib = lever_arms;
    out.push_back(std::move(tr));
  }
  return out;
}

json scenario_to_json(const sim::SimScenario& sc) {
  return {{"profile", sim::profile_name(sc.profile)},
          {"duration", sc.duration},
          {"imu_rate", sc.imu_rate},
          {"gnss_rates", sc.gnss_rates},
          {"lever_arms", to_json(sc.lever_arms)},
          {"seed", sc.seed},
          {"gnss_sigma", sc.gnss_sigma},
          {"b_gyro0", to_json(sc.b_gyro0)},
          {"b_acc0", to_json(sc.b_acc0)},
          {"noise", noise_to_json(sc.noise)}};
}

sim::SimScenario scenario_from_json(const json& j) {
  const std::string ctx = "scenario";
  check_keys(j, {"profile", "duration", "imu_rate", "gnss_rates", "lever_arms", "seed", "gnss_sigma",
                 "b_gyro0", "b_acc0", "noise"},
             ctx);
  sim::SimScenario sc;
  if (j.contains("profile")) {
    if (!j["profile"].is_string()) throw ConfigError("scenario.profile: expected a string");
    sc.profile = sim::parse_profile(j["profile"].get<std::string>());
  }
  get_to(j, "duration", sc.duration, ctx);
  get_to(j, "imu_rate", sc.imu_rate, ctx);
  get_to(j, "gnss_rates", sc.gnss_rates, ctx);
  if (j.contains("lever_arms")) sc.lever_arms = vec3_list_from(j["lever_arms"], ctx + ".lever_arms");
  get_to(j, "seed", sc.seed, ctx);
  get_to(j, "gnss_sigma", sc.gnss_sigma, ctx);
  get_vec3(j, "b_gyro0", sc.b_gyro0, ctx);
  get_vec3(j, "b_acc0", sc.b_acc0, ctx);
  if (j.contains("noise")) sc.noise = noise_from_json(j["noise"], sc.noise, ctx + ".noise");
  if (j.contains("lever_arms") && !j.contains("gnss_rates")) {
    sc.gnss_rates.assign(sc.lever_arms.size(), 5.0);
  }
  sc.validate();
  return sc;
}

sim::SimScenario load_scenario(const std::string& name_or_path) {
  std::error_code ec;
  if (fs::is_regular_file(name_or_path, ec)) return scenario_from_json(read_json(name_or_path));
  sim::SimScenario sc;
  try {
    sc.profile = sim::parse_profile(name_or_path);
  } catch (const ConfigError&) {
    throw ConfigError("scenario '" + name_or_path +
                      "' is neither a profile (hover, circle, figure8, low_excitation) nor a file");
  }
  return sc;
}

void write_sim(const fs::path& dir, const sim::SimData& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir.string() + ": cannot create directory: " + ec.message());
  write_imu(dir / "imu.csv", data.imu);
  for (std::size_t i = 0; i < data.gnss.size(); ++i) {
    write_gnss(dir / ("gnss_" + std::to_string(i + 1) + ".csv"), data.gnss[i]);
  }
  std::vector<TruthRecord> truth;
  truth.reserve(data.truth.size());
  for (const auto& s : data.truth) truth.push_back({s.t, s.R.quaternion(), s.p, s.v});
  write_truth(dir / "truth.csv", truth);
  write_json(dir / "scenario.json", scenario_to_json(data.scenario));
}

LoadedDataset load_dataset(const fs::path& dir) {
  LoadedDataset out;
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  out.data.imu = read_imu(dir / "imu.csv");
  for (std::size_t i = 0;; ++i) {
    const fs::path p = dir / ("gnss_" + std::to_string(i + 1) + ".csv");
    if (!fs::exists(p)) break;
    GnssStream s = read_gnss(p, i);
    out.data.gnss.push_back(std::move(s.samples));
    out.warnings.insert(out.warnings.end(), s.warnings.begin(), s.warnings.end());
  }
  if (out.data.gnss.empty()) throw DataError(dir.string() + ": no gnss_1.csv found");
  const std::size_t n = out.data.gnss.size();

  if (fs::exists(dir / "scenario.json")) {
    try {
      out.scenario = scenario_from_json(read_json(dir / "scenario.json"));
    } catch (const ConfigError& e) {
      throw DataError((dir / "scenario.json").string() + ": " + e.what());
    }
    if (out.scenario->num_sensors() != n) {
      throw DataError((dir / "scenario.json").string() + ": lists " +
                      std::to_string(out.scenario->num_sensors()) + " lever arms but " +
                      std::to_string(n) + " GNSS files exist");
    }
  }
  if (fs::exists(dir / "truth.csv")) {
    std::vector<Vec3> arms(n, Vec3::Zero());
    Vec3 bg = Vec3::Zero(), ba = Vec3::Zero();
    if (out.scenario) {
      arms = out.scenario->lever_arms;
      bg = out.scenario->b_gyro0;
      ba = out.scenario->b_acc0;
    } else {
      out.warnings.push_back("no scenario.json: lever-arm ground truth unavailable, using zeros");
    }
    out.data.truth = to_truth_rows(read_truth(dir / "truth.csv"), arms, bg, ba);
  }
  return out;
}

run::RunOptions RunConfig::options(eval::FilterKind kind, std::size_t n_sensors) const {
  run::RunOptions o;
  o.kind = kind;
  o.cfg = noise;
  o.cfg.p0_diag = make_p0_diag(prior, n_sensors);
  o.eqf_opts = eqf;
  o.mekf_opts = mekf;
  o.gnss_sigma = gnss_sigma;
  o.record_stride = record_stride;
  return o;
}

json run_config_to_json(const RunConfig& c) {
  json init = {{"base", c.init.base == run::InitPolicy::Base::kTruth ? "truth" : "origin"},
               {"attitude_error_deg", to_json(c.init.attitude_error_deg)},
               {"calib", c.init.calib ? to_json(*c.init.calib) : json(nullptr)},
               {"truth_biases", c.init.truth_biases},
               {"relative_error", c.init.relative_error}};
  json eqf = {
      {"scheme", c.eqf.scheme == eqf::PropagationScheme::kFirstOrder ? "first_order" : "cf4"},
      {"noise_model",
       c.eqf.noise_model == eqf::ProcessNoiseModel::kDiagonal ? "diagonal" : "transported"},
      {"exact_transition", c.eqf.exact_transition},
      {"gate", c.eqf.gate},
      {"max_condition", c.eqf.max_condition}};
  return {{"noise", noise_to_json(c.noise)},
          {"prior_std",
           {{"att", c.prior.att},
            {"vel", c.prior.vel},
            {"pos", c.prior.pos},
            {"bias_gyro", c.prior.bias_gyro},
            {"bias_acc", c.prior.bias_acc},
            {"calib", c.prior.calib}}},
          {"gnss_sigma", c.gnss_sigma},
          {"init", init},
          {"t0", c.t0 ? json(*c.t0) : json(nullptr)},
          {"record_stride", c.record_stride},
          {"eqf", eqf},
          {"mekf", {{"gate", c.mekf.gate}, {"max_condition", c.mekf.max_condition}}}};
}

RunConfig run_config_from_json(const json& j) {
  const std::string ctx = "config";
  check_keys(j, {"noise", "prior_std", "gnss_sigma", "init", "t0", "record_stride", "eqf", "mekf"},
             ctx);
  RunConfig c;
  if (j.contains("noise")) c.noise = noise_from_json(j["noise"], c.noise, ctx + ".noise");
  if (j.contains("prior_std")) {
    const json& p = j["prior_std"];
    const std::string pc = ctx + ".prior_std";
    check_keys(p, {"att", "vel", "pos", "bias_gyro", "bias_acc", "calib"}, pc);
    get_to(p, "att", c.prior.att, pc);
    get_to(p, "vel", c.prior.vel, pc);
    get_to(p, "pos", c.prior.pos, pc);
    get_to(p, "bias_gyro", c.prior.bias_gyro, pc);
    get_to(p, "bias_acc", c.prior.bias_acc, pc);
    get_to(p, "calib", c.prior.calib, pc);
  }
  get_to(j, "gnss_sigma", c.gnss_sigma, ctx);
  if (!(c.gnss_sigma > 0.0)) throw ConfigError("config.gnss_sigma must be > 0");
  if (j.contains("init")) {
    const json& in = j["init"];
    const std::string ic = ctx + ".init";
    check_keys(in, {"base", "attitude_error_deg", "calib", "truth_biases", "relative_error"}, ic);
    if (in.contains("base")) {
      const std::string b = in["base"].is_string() ? in["base"].get<std::string>() : "";
      if (b == "origin") {
        c.init.base = run::InitPolicy::Base::kOrigin;
      } else if (b == "truth") {
        c.init.base = run::InitPolicy::Base::kTruth;
      } else {
        throw ConfigError(ic + ".base: expected \"origin\" or \"truth\"");
      }
    }
    get_vec3(in, "attitude_error_deg", c.init.attitude_error_deg, ic);
    if (in.contains("calib") && !in["calib"].is_null()) {
      c.init.calib = vec3_list_from(in["calib"], ic + ".calib");
    }
    get_to(in, "truth_biases", c.init.truth_biases, ic);
    get_to(in, "relative_error", c.init.relative_error, ic);
  }
  if (j.contains("t0") && !j["t0"].is_null()) {
    double t0 = 0.0;
    get_to(j, "t0", t0, ctx);
    c.t0 = t0;
  }
  get_to(j, "record_stride", c.record_stride, ctx);
  if (c.record_stride == 0) throw ConfigError("config.record_stride must be >= 1");
  if (j.contains("eqf")) {
    const json& e = j["eqf"];
    const std::string ec = ctx + ".eqf";
    check_keys(e, {"scheme", "noise_model", "exact_transition", "gate", "max_condition"}, ec);
    if (e.contains("scheme")) {
      const std::string s = e["scheme"].is_string() ? e["scheme"].get<std::string>() : "";
      if (s == "cf4") {
        c.eqf.scheme = eqf::PropagationScheme::kCommutatorFree4;
      } else if (s == "first_order") {
        c.eqf.scheme = eqf::PropagationScheme::kFirstOrder;
      } else {
        throw ConfigError(ec + ".scheme: expected \"cf4\" or \"first_order\"");
      }
    }
    if (e.contains("noise_model")) {
      const std::string s = e["noise_model"].is_string() ? e["noise_model"].get<std::string>() : "";
      if (s == "transported") {
        c.eqf.noise_model = eqf::ProcessNoiseModel::kTransported;
      } else if (s == "diagonal") {
        c.eqf.noise_model = eqf::ProcessNoiseModel::kDiagonal;
      } else {
        throw ConfigError(ec + ".noise_model: expected \"transported\" or \"diagonal\"");
      }
    }
    get_to(e, "exact_transition", c.eqf.exact_transition, ec);
    get_to(e, "gate", c.eqf.gate, ec);
    get_to(e, "max_condition", c.eqf.max_condition, ec);
  }
  if (j.contains("mekf")) {
    const json& m = j["mekf"];
    const std::string mc = ctx + ".mekf";
    check_keys(m, {"gate", "max_condition"}, mc);
    get_to(m, "gate", c.mekf.gate, mc);
    get_to(m, "max_condition", c.mekf.max_condition, mc);
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) { return run_config_from_json(read_json(path)); }

void write_run(const fs::path& path, const eval::RunRecord& run) {
  const std::size_t n = run.num_sensors;
  bool has_truth = false;
  for (const auto& r : run.rows) has_truth = has_truth || r.truth.has_value();
  const auto dim = static_cast<std::size_t>(layout::dim(n));

  CsvTable t;
  t.header = run_header(n, has_truth);

  const std::vector<double> nees = eval::nees_series(run);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < run.rows.size(); ++r) {
    const auto& row = run.rows[r];
    std::vector<double> v;
    v.reserve(t.header.size());
    auto push3 = [&](const Vec3& x) { v.insert(v.end(), {x.x(), x.y(), x.z()}); };
    const Eigen::Vector4d q = row.est_q ? *row.est_q : row.est.R.quaternion();
    v.push_back(row.t);
    v.insert(v.end(), {q[0], q[1], q[2], q[3]});
    push3(row.est.p);
    push3(row.est.v);
    push3(row.est.b_gyro);
    push3(row.est.b_acc);
    for (const auto& c : row.est.calib) push3(c);
    if (has_truth) {
      if (row.truth) {
        const Eigen::Vector4d qt = row.truth_q ? *row.truth_q : row.truth->R.quaternion();
        v.insert(v.end(), {qt[0], qt[1], qt[2], qt[3]});
        push3(row.truth->p);
        push3(row.truth->v);
        for (const auto& c : row.truth->calib) push3(c);
      } else {
        v.insert(v.end(), 10 + 3 * n, nan);
      }
    }
    for (std::size_t k = 0; k < dim; ++k) {
      v.push_back(k < static_cast<std::size_t>(row.P_diag.size()) ? row.P_diag[k] : nan);
    }
    v.push_back(nees[r]);
    t.rows.push_back(std::move(v));
  }
  write_csv(path, t);
}

eval::RunRecord read_run(const fs::path& path, eval::FilterKind kind) {
  const CsvTable t = read_csv(path);
  std::size_t n = 0;
  while (std::find(t.header.begin(), t.header.end(), "t" + std::to_string(n + 1) + "x") !=
         t.header.end()) {
    ++n;
  }
  const bool has_truth = std::find(t.header.begin(), t.header.end(), "gt_qw") != t.header.end();
  if (n == 0) throw DataError(where(path, 1) + "run file has no lever-arm columns");
  expect_header(path, t, run_header(n, has_truth));

  eval::RunRecord run;
  run.kind = kind;
  run.num_sensors = n;
  const auto dim = layout::dim(n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& v = t.rows[r];
    std::size_t c = 0;
    eval::RunRow row;
    try {
      row.t = v[c++];
      row.est.R = Rot3::from_quaternion(v[c], v[c + 1], v[c + 2], v[c + 3]);
      row.est_q = Eigen::Vector4d(v[c], v[c + 1], v[c + 2], v[c + 3]);
      c += 4;
      row.est.p = vec3_at(v, c), c += 3;
      row.est.v = vec3_at(v, c), c += 3;
      row.est.b_gyro = vec3_at(v, c), c += 3;
      row.est.b_acc = vec3_at(v, c), c += 3;
      for (std::size_t i = 0; i < n; ++i) row.est.calib.push_back(vec3_at(v, c)), c += 3;
      if (has_truth) {
        if (std::isfinite(v[c])) {
          NavState x = NavState::origin(n);
          x.R = Rot3::from_quaternion(v[c], v[c + 1], v[c + 2], v[c + 3]);
          row.truth_q = Eigen::Vector4d(v[c], v[c + 1], v[c + 2], v[c + 3]);
          c += 4;
          x.p = vec3_at(v, c), c += 3;
          x.v = vec3_at(v, c), c += 3;
          for (std::size_t i = 0; i < n; ++i) x.calib[i] = vec3_at(v, c), c += 3;
          row.truth = x;
        } else {
          c += 10 + 3 * n;
        }
      }
    } catch (const std::invalid_argument& e) {
      throw DataError(where(path, t.lines[r]) + e.what());
    }
    row.P_diag = Eigen::Map<const VecX>(v.data() + c, dim);
    c += static_cast<std::size_t>(dim);
    row.nees = v[c];
    run.rows.push_back(std::move(row));
  }
  if (run.rows.empty()) throw DataError(path.string() + ": run file has no rows");
  return run;
}

json summary_to_json(const eval::Summary& s) {
  return {{"filter", s.filter},
          {"rmse_pos", s.rmse_pos},
          {"rmse_att", s.rmse_att},
          {"rmse_calib", s.rmse_calib},
          {"nees_mean", s.nees_mean},
          {"t0", s.t0},
          {"final_calib", to_json(s.final_calib)},
          {"final_calib_error", s.final_calib_error},
          {"samples", s.samples}};
}

json comparison_to_json(const eval::Comparison& c) {
  json verdicts = json::array();
  for (const auto& v : c.verdicts) {
    verdicts.push_back({{"metric", v.metric}, {"eqf", v.eqf}, {"mekf", v.mekf}, {"best", v.best}});
  }
  auto best_of = [&](const std::string& m) {
    for (const auto& v : c.verdicts) {
      if (v.metric == m) return v.best;
    }
    return std::string("tie");
  };
  json table = {
      {"columns", {"t0 [s]", "EqF pos [m]", "EqF att [deg]", "MEKF pos [m]", "MEKF att [deg]"}},
      {"row", {c.t0, c.eqf.rmse_pos, c.eqf.rmse_att, c.mekf.rmse_pos, c.mekf.rmse_att}},
      {"best", {{"pos", best_of("rmse_pos")}, {"att", best_of("rmse_att")}}}};
  return {{"t0", c.t0},
          {"eqf", summary_to_json(c.eqf)},
          {"mekf", summary_to_json(c.mekf)},
          {"verdicts", verdicts},
          {"nees_normalization", "dimension"},
          {"table_i_style", table}};
}

std::string comparison_table(const eval::Comparison& c) {
  std::ostringstream os;
  os << "t0 = " << fixed(c.t0, 2) << " s\n";
  os << "metric          eqf            mekf           best\n";
  for (const auto& v : c.verdicts) {
    char line[128];
    std::snprintf(line, sizeof line, "%-15s %-14.6g %-14.6g %s\n", v.metric.c_str(), v.eqf, v.mekf,
                  v.best.c_str());
    os << line;
  }
  return os.str();
}

json montecarlo_to_json(const mc::MonteCarloConfig& cfg, const std::vector<mc::SeedResult>& seeds,
                        const mc::Aggregate& agg) {
  auto stats = [](const mc::Stats& s) {
    return json{{"median", s.median}, {"p10", s.p10}, {"p90", s.p90}};
  };
  json per_seed = json::array();
  for (const auto& s : seeds) {
    json e = {{"seed", s.seed}, {"ok", s.ok}};
    if (!s.ok) e["error"] = s.error;
    for (const auto& f : s.per_filter) {
      json fj = summary_to_json(f.summary);
      fj["att_err_probe_deg"] = f.att_err_probe_deg;
      e[eval::filter_name(f.kind)] = fj;
    }
    per_seed.push_back(e);
  }
  json filters = json::object();
  for (const auto& f : agg.filters) {
    json calib = json::array();
    for (const auto& s : f.final_calib_error) calib.push_back(stats(s));
    filters[eval::filter_name(f.kind)] = {{"rmse_pos", stats(f.rmse_pos)},
                                          {"rmse_att", stats(f.rmse_att)},
                                          {"nees_mean", stats(f.nees_mean)},
                                          {"att_err_probe_deg", stats(f.att_err_probe_deg)},
                                          {"final_calib_error", calib}};
  }
  json wins = json::array();
  for (const auto& w : agg.win_rates) {
    wins.push_back({{"metric", w.metric},
                    {"description", w.description},
                    {"eqf_wins", w.eqf_wins},
                    {"total", w.total},
                    {"fraction", w.fraction}});
  }
  return {{"scenario", scenario_to_json(cfg.scenario)},
          {"t0", cfg.resolved_t0()},
          {"t_probe", cfg.t_probe},
          {"attitude_error_deg", to_json(cfg.init.attitude_error_deg)},
          {"seeds_total", agg.seeds_total},
          {"seeds_failed", agg.seeds_failed},
          {"aggregate", filters},
          {"win_rates", wins},
          {"per_seed", per_seed}};
}

std::string montecarlo_table(const mc::Aggregate& agg) {
  std::ostringstream os;
  os << "seeds: " << agg.seeds_total << " (" << agg.seeds_failed << " failed)\n";
  os << "filter  metric              median        p10           p90\n";
  for (const auto& f : agg.filters) {
    auto line = [&](const char* name, const mc::Stats& s) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-7s %-19s %-13.6g %-13.6g %-13.6g\n",
                    eval::filter_name(f.kind).c_str(), name, s.median, s.p10, s.p90);
      os << buf;
    };
    line("rmse_pos [m]", f.rmse_pos);
    line("rmse_att [deg]", f.rmse_att);
    line("nees_mean", f.nees_mean);
    line("att_err_probe [deg]", f.att_err_probe_deg);
  }
  for (const auto& w : agg.win_rates) {
    os << w.description << ": " << w.eqf_wins << "/" << w.total << " (" << fixed(w.fraction, 2)
       << ")\n";
  }
  return os.str();
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace equinav::io
