#pragma once

#include <cstddef>
#include <string>

#include "equinav/types.hpp"

// Multiplicative error-state EKF over the same state and measurement model.
// Error ordering (dtheta, dv, dp, db_gyro, db_acc, dt_1 ... dt_N) with
// R = R_hat * exp(dtheta^).
namespace equinav::mekf {

enum class UpdateStatus { kAccepted, kRejectedConditioning, kRejectedGate };

struct Options {
  double gate = 1000.0;
  double max_condition = 1e12;
};

struct MekfState {
  NavState nominal;
  MatX P;
  double t_last = 0.0;
  NoiseConfig cfg;
  Options opts;

  std::size_t num_sensors() const { return nominal.num_sensors(); }
};

struct UpdateOutcome {
  MekfState state;
  UpdateStatus status = UpdateStatus::kAccepted;
  VecX correction;
  Vec3 residual = Vec3::Zero();
  std::string diagnostic;
};

MekfState init(std::size_t n_sensors, const NoiseConfig& cfg, const Options& opts = {});
MekfState init_at(const NavState& xi0, const NoiseConfig& cfg, const Options& opts = {});

/// Continuous-time error dynamics F_c.
MatX error_dynamics(const MekfState& ms, const ImuInput& u);
/// Measurement Jacobian of y = p + R t_i.
MatX measurement_jacobian(const MekfState& ms, std::size_t i);

MekfState propagate(const MekfState& ms, const ImuInput& u, double dt);
MekfState propagate(const MekfState& ms, const ImuInput& u0, const ImuInput& u1, double dt);
MekfState propagate(const MekfState& ms, const InputSegment& u, double dt);

/// Standard EKF update with Joseph-form covariance.
UpdateOutcome update(const MekfState& ms, std::size_t i, const Vec3& y, const Mat3& R_meas);

inline const NavState& state_estimate(const MekfState& ms) { return ms.nominal; }

/// Fourth-order integration of the deterministic core dynamics (biases and
/// lever arms held constant) over one input segment.
NavState integrate_nominal(const NavState& xi, const InputSegment& u, double dt,
                           const Vec3& gravity);

}  // namespace equinav::mekf
