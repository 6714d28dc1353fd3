#include "equinav/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace equinav::sim {
namespace {

// offset + rate * t + sum amp * sin(freq * t + phase), with derivatives.
struct Signal {
  double offset = 0.0;
  double rate = 0.0;
  struct Term {
    double amp, freq, phase;
  };
  std::vector<Term> terms;

  double value(double t) const {
    double x = offset + rate * t;
    for (const auto& s : terms) x += s.amp * std::sin(s.freq * t + s.phase);
    return x;
  }
  double d1(double t) const {
    double x = rate;
    for (const auto& s : terms) x += s.amp * s.freq * std::cos(s.freq * t + s.phase);
    return x;
  }
  double d2(double t) const {
    double x = 0.0;
    for (const auto& s : terms) x -= s.amp * s.freq * s.freq * std::sin(s.freq * t + s.phase);
    return x;
  }
};

struct Motion {
  Signal x, y, z;           // position, m
  Signal roll, pitch, yaw;  // ZYX Euler angles, rad
  bool yaw_along_track = false;  // yaw = heading of the horizontal velocity
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Motion motion_for(Profile profile) {
  Motion m;
  switch (profile) {
    case Profile::kHover:
      break;
    case Profile::kCircle: {
      // Radius 5 m, period 20 s, heading along the tangent.
      const double r = 5.0, w = kTwoPi / 20.0;
      m.x.terms = {{r, w, 0.0}};
      m.y.offset = r;
      m.y.terms = {{-r, w, std::numbers::pi / 2.0}};
      m.yaw.rate = w;
      break;
    }
    case Profile::kFigure8: {
      const double w = kTwoPi / 20.0;
      m.x.terms = {{10.0, w, 0.0}};
      m.y.terms = {{4.0, 2.0 * w, 0.0}};
      m.z.terms = {{1.0, 0.5 * w, 0.0}};
      m.yaw_along_track = true;
      m.roll.terms = {{0.3, 2.0 * w, 0.0}};
      m.pitch.terms = {{0.3, 1.5 * w, 0.0}};
      break;
    }
    case Profile::kLowExcitation: {
      m.x.terms = {{0.5, 0.2, 0.0}};
      m.y.terms = {{0.3, 0.15, 0.0}};
      m.z.terms = {{0.1, 0.1, 0.0}};
      m.yaw.terms = {{0.05, 0.1, 0.0}};
      m.roll.terms = {{0.02, 0.3, 0.0}};
      m.pitch.terms = {{0.02, 0.25, 0.0}};
      break;
    }
  }
  return m;
}

Mat3 euler_zyx(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

Profile parse_profile(const std::string& name) {
  if (name == "hover") return Profile::kHover;
  if (name == "circle") return Profile::kCircle;
  if (name == "figure8") return Profile::kFigure8;
  if (name == "low_excitation") return Profile::kLowExcitation;
  throw ConfigError("unknown trajectory profile '" + name + "'");
}

std::string profile_name(Profile p) {
  switch (p) {
    case Profile::kHover: return "hover";
    case Profile::kCircle: return "circle";
    case Profile::kFigure8: return "figure8";
    case Profile::kLowExcitation: return "low_excitation";
  }
  return "unknown";
}

void SimScenario::validate() const {
  if (!(duration > 0.0)) throw ConfigError("scenario duration must be > 0");
  if (!(imu_rate > 0.0)) throw ConfigError("IMU rate must be > 0");
  if (lever_arms.empty()) throw ConfigError("at least one GNSS sensor is required");
  if (gnss_rates.size() != lever_arms.size()) {
    throw ConfigError("gnss_rates and lever_arms must have the same length");
  }
  for (double r : gnss_rates) {
    if (!(r > 0.0)) throw ConfigError("GNSS rates must be > 0");
  }
  if (!(gnss_sigma >= 0.0)) throw ConfigError("gnss_sigma must be >= 0");
}

TruthSample sample_trajectory(const SimScenario& sc, double t) {
  const Motion m = motion_for(sc.profile);
  TruthSample s;
  s.t = t;
  s.p = {m.x.value(t), m.y.value(t), m.z.value(t)};
  s.v = {m.x.d1(t), m.y.d1(t), m.z.d1(t)};
  const Vec3 acc_world(m.x.d2(t), m.y.d2(t), m.z.d2(t));
  const double r = m.roll.value(t), p = m.pitch.value(t);
  const double rd = m.roll.d1(t), pd = m.pitch.d1(t);
  double y = m.yaw.value(t), yd = m.yaw.d1(t);
  if (m.yaw_along_track) {
    const double vx = s.v.x(), vy = s.v.y();
    y = std::atan2(vy, vx);
    yd = (vx * acc_world.y() - vy * acc_world.x()) / (vx * vx + vy * vy);
  }
  s.R = Rot3(euler_zyx(r, p, y));
  s.omega_body = {rd - yd * std::sin(p),
                  pd * std::cos(r) + yd * std::sin(r) * std::cos(p),
                  -pd * std::sin(r) + yd * std::cos(r) * std::cos(p)};
  s.acc_body = s.R.matrix().transpose() * (acc_world - sc.noise.gravity);
  return s;
}

std::vector<TruthSample> gen_trajectory(const SimScenario& sc) {
  sc.validate();
  const auto n = static_cast<std::size_t>(std::floor(sc.duration * sc.imu_rate + 1e-9));
  std::vector<TruthSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    TruthSample s = sample_trajectory(sc, static_cast<double>(k) / sc.imu_rate);
    s.b_gyro = sc.b_gyro0;
    s.b_acc = sc.b_acc0;
    out.push_back(s);
  }
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

void apply_bias_walk(std::vector<TruthSample>& truth, const NoiseConfig& noise,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t k = 1; k < truth.size(); ++k) {
    const double dt = truth[k].t - truth[k - 1].t;
    const double sg = noise.sigma_bg_walk * std::sqrt(dt);
    const double sa = noise.sigma_ba_walk * std::sqrt(dt);
    for (int j = 0; j < 3; ++j) truth[k].b_gyro[j] = truth[k - 1].b_gyro[j] + sg * normal(rng);
    for (int j = 0; j < 3; ++j) truth[k].b_acc[j] = truth[k - 1].b_acc[j] + sa * normal(rng);
  }
}

std::vector<ImuSample> synth_imu(const std::vector<TruthSample>& truth, const NoiseConfig& noise,
                                 std::uint64_t seed) {
  std::vector<ImuSample> out;
  if (truth.empty()) return out;
  const double rate =
      truth.size() > 1 ? 1.0 / (truth[1].t - truth[0].t) : 1.0;
  const double sg = noise.sigma_gyro * std::sqrt(rate);
  const double sa = noise.sigma_acc * std::sqrt(rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  out.reserve(truth.size());
  for (const auto& s : truth) {
    ImuSample m;
    m.t = s.t;
    m.gyro = s.omega_body + s.b_gyro;
    m.acc = s.acc_body + s.b_acc;
    for (int j = 0; j < 3; ++j) m.gyro[j] += sg * normal(rng);
    for (int j = 0; j < 3; ++j) m.acc[j] += sa * normal(rng);
    out.push_back(m);
  }
  return out;
}

std::vector<GnssSample> synth_gnss(const std::vector<TruthSample>& truth, std::size_t i,
                                   const SimScenario& sc, std::uint64_t seed) {
  if (i >= sc.num_sensors()) throw std::out_of_range("synth_gnss: sensor index out of range");
  std::vector<GnssSample> out;
  if (truth.empty()) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double rate = sc.gnss_rates[i];
  for (std::size_t j = 0;; ++j) {
    const auto k = static_cast<std::size_t>(
        std::llround(static_cast<double>(j) * sc.imu_rate / rate));
    if (k >= truth.size()) break;
    const TruthSample& s = truth[k];
    GnssSample g;
    g.t = s.t;
    g.sensor = i;
    g.pos = s.p + s.R * sc.lever_arms[i];
    for (int a = 0; a < 3; ++a) g.pos[a] += sc.gnss_sigma * normal(rng);
    out.push_back(g);
  }
  return out;
}

SimData simulate(const SimScenario& sc) {
  SimData data;
  data.scenario = sc;
  data.truth = gen_trajectory(sc);
  apply_bias_walk(data.truth, sc.noise, stream_seed(sc.seed, 0));
  data.imu = synth_imu(data.truth, sc.noise, stream_seed(sc.seed, 1));
  for (std::size_t i = 0; i < sc.num_sensors(); ++i) {
    data.gnss.push_back(synth_gnss(data.truth, i, sc, stream_seed(sc.seed, 10 + i)));
  }
  return data;
}

NavState to_nav_state(const TruthSample& s, const std::vector<Vec3>& lever_arms) {
  NavState x;
  x.R = s.R;
  x.v = s.v;
  x.p = s.p;
  x.b_gyro = s.b_gyro;
  x.b_acc = s.b_acc;
  x.calib = lever_arms;
  return x;
}

}  // namespace equinav::sim
