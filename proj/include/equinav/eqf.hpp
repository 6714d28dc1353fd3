#pragma once

#include <cstddef>
#include <string>

#include "equinav/symmetry.hpp"
#include "equinav/types.hpp"

namespace equinav::eqf {

enum class PropagationScheme {
  kFirstOrder,        // X <- X exp(dt * Lambda(xi_hat, u))
  kCommutatorFree4,   // fourth-order commutator-free integration of the lifted flow
};

enum class ProcessNoiseModel {
  kDiagonal,     // diag(sg^2, sa^2, 0, sbg^2, sba^2, st^2) in local coordinates
  kTransported,  // IMU and bias noise pushed through the Adjoint of X_hat
};

enum class UpdateStatus { kAccepted, kRejectedConditioning, kRejectedGate };

struct Options {
  PropagationScheme scheme = PropagationScheme::kCommutatorFree4;
  ProcessNoiseModel noise_model = ProcessNoiseModel::kTransported;
  /// Use exp(A dt) instead of I + A dt for the Riccati transition.
  bool exact_transition = false;
  /// Innovations with Mahalanobis distance above this are rejected.
  double gate = 1000.0;
  /// Updates whose innovation covariance exceeds this condition number are rejected.
  double max_condition = 1e12;
};

struct FilterState {
  sym::GroupElement X;
  MatX P;  // covariance of the local-coordinate error
  double t_last = 0.0;
  NoiseConfig cfg;
  Options opts;

  std::size_t num_sensors() const { return X.num_sensors(); }
};

struct UpdateQuantities {
  Mat3 S = Mat3::Zero();
  MatX K;
  Vec3 delta = Vec3::Zero();
  sym::GroupTangent Delta;
  Mat3 N = Mat3::Zero();
  double mahalanobis = 0.0;
};

struct UpdateOutcome {
  FilterState state;
  UpdateStatus status = UpdateStatus::kAccepted;
  UpdateQuantities q;
  std::string diagnostic;
};

/// X_hat = id, P = diag(p0_diag).
FilterState init(std::size_t n_sensors, const NoiseConfig& cfg, const Options& opts = {});
/// X_hat chosen so that the state estimate equals `xi0`.
FilterState init_at(const NavState& xi0, const NoiseConfig& cfg, const Options& opts = {});

/// Linearized error dynamics A_t in the fixed block order.
MatX build_A(const FilterState& fs, const ImuInput& u);
/// Output matrix for sensor i, which depends on the raw reading y.
MatX build_C(const FilterState& fs, std::size_t i, const Vec3& y);
/// Continuous-time process noise in local coordinates.
MatX process_noise(const FilterState& fs);

/// Zero-order hold on the input over dt.
FilterState propagate(const FilterState& fs, const ImuInput& u, double dt);
/// Input varying linearly from u0 to u1 over dt.
FilterState propagate(const FilterState& fs, const ImuInput& u0, const ImuInput& u1, double dt);
FilterState propagate(const FilterState& fs, const InputSegment& u, double dt);

/// GNSS antenna position update. Rejections leave the state untouched.
UpdateOutcome update(const FilterState& fs, std::size_t i, const Vec3& y, const Mat3& R_meas);

NavState state_estimate(const FilterState& fs);

}  // namespace equinav::eqf
