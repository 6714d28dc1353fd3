#include "equinav/types.hpp"

#include <cmath>

namespace equinav {

void NoiseConfig::validate(std::size_t n_sensors) const {
  if (n_sensors == 0) throw ConfigError("at least one GNSS sensor is required");
  for (double s : {sigma_gyro, sigma_acc, sigma_bg_walk, sigma_ba_walk, sigma_calib_walk}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("noise densities must be finite and >= 0");
  }
  if (p0_diag.size() != layout::dim(n_sensors)) {
    throw ConfigError("p0_diag must have length 15 + 3N (got " +
                      std::to_string(p0_diag.size()) + ")");
  }
  if (!(p0_diag.array() > 0.0).all() || !p0_diag.allFinite()) {
    throw ConfigError("p0_diag entries must be positive");
  }
  if (!gravity.allFinite()) throw ConfigError("gravity must be finite");
}

VecX make_p0_diag(const PriorStd& prior, std::size_t n_sensors) {
  VecX d(layout::dim(n_sensors));
  d.segment<3>(layout::kRot).setConstant(prior.att * prior.att);
  d.segment<3>(layout::kVel).setConstant(prior.vel * prior.vel);
  d.segment<3>(layout::kPos).setConstant(prior.pos * prior.pos);
  d.segment<3>(layout::kBiasGyro).setConstant(prior.bias_gyro * prior.bias_gyro);
  d.segment<3>(layout::kBiasAcc).setConstant(prior.bias_acc * prior.bias_acc);
  for (std::size_t i = 0; i < n_sensors; ++i) {
    d.segment<3>(layout::calib(i)).setConstant(prior.calib * prior.calib);
  }
  return d;
}

namespace layout {

std::vector<Eigen::Index> evaluated_indices(std::size_t n_sensors) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < 3; ++k) idx.push_back(kRot + k);
  for (Eigen::Index k = 0; k < 3; ++k) idx.push_back(kPos + k);
  for (std::size_t i = 0; i < n_sensors; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) idx.push_back(calib(i) + k);
  }
  return idx;
}

}  // namespace layout
}  // namespace equinav
