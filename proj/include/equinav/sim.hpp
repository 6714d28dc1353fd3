#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "equinav/types.hpp"

namespace equinav::sim {

enum class Profile { kHover, kCircle, kFigure8, kLowExcitation };

Profile parse_profile(const std::string& name);
std::string profile_name(Profile p);

struct TruthSample {
  double t = 0.0;
  Rot3 R;
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 omega_body = Vec3::Zero();
  Vec3 acc_body = Vec3::Zero();  // specific force
  Vec3 b_gyro = Vec3::Zero();
  Vec3 b_acc = Vec3::Zero();
};

struct SimScenario {
  Profile profile = Profile::kFigure8;
  double duration = 60.0;
  double imu_rate = 200.0;
  std::vector<double> gnss_rates = {5.0, 5.0};
  std::vector<Vec3> lever_arms = {Vec3(0.35, 0.41, 0.0), Vec3(-0.47, -0.41, 0.0)};
  std::uint64_t seed = 0;
  NoiseConfig noise;
  double gnss_sigma = 0.05;
  Vec3 b_gyro0 = Vec3(0.01, -0.01, 0.005);
  Vec3 b_acc0 = Vec3(0.05, 0.02, -0.03);

  std::size_t num_sensors() const { return lever_arms.size(); }
  void validate() const;
};

/// Noise-free kinematics of the profile at time t (biases left at zero).
TruthSample sample_trajectory(const SimScenario& sc, double t);

/// Samples at the IMU rate over [0, duration], biases set to the initial values.
std::vector<TruthSample> gen_trajectory(const SimScenario& sc);

/// Random-walk evolution of the true biases, written into the truth samples.
void apply_bias_walk(std::vector<TruthSample>& truth, const NoiseConfig& noise,
                     std::uint64_t seed);

/// omega = omega_body + b_gyro + white noise, a = acc_body + b_acc + white noise.
std::vector<ImuSample> synth_imu(const std::vector<TruthSample>& truth, const NoiseConfig& noise,
                                 std::uint64_t seed);

/// y = p + R t_i + N(0, gnss_sigma^2 I) at gnss_rates[i], on the truth clock.
std::vector<GnssSample> synth_gnss(const std::vector<TruthSample>& truth, std::size_t i,
                                   const SimScenario& sc, std::uint64_t seed);

struct SimData {
  SimScenario scenario;
  std::vector<TruthSample> truth;
  std::vector<ImuSample> imu;
  std::vector<std::vector<GnssSample>> gnss;
};

/// Full pipeline with independent per-stream seeds derived from sc.seed.
SimData simulate(const SimScenario& sc);

NavState to_nav_state(const TruthSample& s, const std::vector<Vec3>& lever_arms);

/// Deterministic per-stream seed derived from a scenario seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace equinav::sim
