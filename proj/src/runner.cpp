#include "equinav/runner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace equinav::run {
namespace {

void check_finite(const NavFilter& f, double t) {
  if (!f.covariance().allFinite()) {
    throw NumericalError("non-finite covariance at t = " + std::to_string(t));
  }
}

Mat3 measurement_cov(const GnssSample& g, double sigma) {
  Vec3 var = g.var;
  for (int a = 0; a < 3; ++a) {
    if (!(var[a] > 0.0)) var[a] = sigma * sigma;
  }
  return var.asDiagonal();
}

MatX sub_block(const MatX& p, const std::vector<Eigen::Index>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  MatX out(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) out(r, c) = p(idx[r], idx[c]);
  }
  return out;
}

}  // namespace

EqfFilter::EqfFilter(const NavState& x0, const NoiseConfig& cfg, const eqf::Options& opts)
    : fs_(eqf::init_at(x0, cfg, opts)) {}

void EqfFilter::propagate(const InputSegment& u, double dt) {
  fs_ = eqf::propagate(fs_, u, dt);
}

UpdateResult EqfFilter::update(std::size_t sensor, const Vec3& y, const Mat3& R_meas) {
  eqf::UpdateOutcome out = eqf::update(fs_, sensor, y, R_meas);
  if (out.status != eqf::UpdateStatus::kAccepted) return UpdateResult::kRejected;
  fs_ = std::move(out.state);
  return UpdateResult::kAccepted;
}

MekfFilter::MekfFilter(const NavState& x0, const NoiseConfig& cfg, const mekf::Options& opts)
    : ms_(mekf::init_at(x0, cfg, opts)) {}

void MekfFilter::propagate(const InputSegment& u, double dt) {
  ms_ = mekf::propagate(ms_, u, dt);
}

UpdateResult MekfFilter::update(std::size_t sensor, const Vec3& y, const Mat3& R_meas) {
  mekf::UpdateOutcome out = mekf::update(ms_, sensor, y, R_meas);
  if (out.status != mekf::UpdateStatus::kAccepted) return UpdateResult::kRejected;
  ms_ = std::move(out.state);
  return UpdateResult::kAccepted;
}

std::unique_ptr<NavFilter> make_filter(const RunOptions& opts, const NavState& x0) {
  NoiseConfig cfg = opts.cfg;
  if (cfg.p0_diag.size() == 0) cfg.p0_diag = make_p0_diag(PriorStd{}, x0.num_sensors());
  if (opts.kind == eval::FilterKind::kEqf) return std::make_unique<EqfFilter>(x0, cfg, opts.eqf_opts);
  return std::make_unique<MekfFilter>(x0, cfg, opts.mekf_opts);
}

ImuInput interpolate_input(const std::vector<ImuSample>& imu, std::size_t k, double t) {
  const std::size_t n = imu.size();
  if (n < 2 || k + 1 >= n) throw std::out_of_range("interpolate_input: interval out of range");
  const std::size_t m = std::min<std::size_t>(4, n);
  const std::size_t first = std::min(k > 0 ? k - 1 : 0, n - m);
  ImuInput out;
  for (std::size_t j = first; j < first + m; ++j) {
    double w = 1.0;
    for (std::size_t l = first; l < first + m; ++l) {
      if (l != j) w *= (t - imu[l].t) / (imu[j].t - imu[l].t);
    }
    out.gyro += w * imu[j].gyro;
    out.acc += w * imu[j].acc;
  }
  return out;
}

NavState make_initial_state(const InitPolicy& policy, const std::optional<NavState>& truth0,
                            std::size_t n_sensors) {
  NavState x = NavState::origin(n_sensors);
  if (policy.base == InitPolicy::Base::kTruth) {
    if (!truth0) throw ConfigError("truth-based initialization requires truth data");
    if (truth0->num_sensors() != n_sensors) {
      throw ConfigError("truth lever arms do not match the number of GNSS streams");
    }
    x = *truth0;
    if (!policy.truth_biases) {
      x.b_gyro.setZero();
      x.b_acc.setZero();
    }
    const double s = 1.0 + policy.relative_error;
    x.v *= s;
    x.p *= s;
    x.b_gyro *= s;
    x.b_acc *= s;
    for (auto& t : x.calib) t *= s;
    x.R = x.R * Rot3::exp(Vec3(0.0, 0.0, policy.relative_error));
  }
  const Vec3 e = policy.attitude_error_deg * (std::numbers::pi / 180.0);
  const Mat3 pert = (Eigen::AngleAxisd(e.z(), Vec3::UnitZ()) *
                     Eigen::AngleAxisd(e.y(), Vec3::UnitY()) *
                     Eigen::AngleAxisd(e.x(), Vec3::UnitX()))
                        .toRotationMatrix();
  x.R = x.R * Rot3::project(pert);
  if (policy.calib) {
    if (policy.calib->size() != n_sensors) {
      throw ConfigError("calibration init has " + std::to_string(policy.calib->size()) +
                        " vectors, expected " + std::to_string(n_sensors));
    }
    x.calib = *policy.calib;
  }
  return x;
}

const TruthRow* nearest_truth(const std::vector<TruthRow>& truth, double t, double tol) {
  if (truth.empty()) return nullptr;
  auto it = std::lower_bound(truth.begin(), truth.end(), t,
                             [](const TruthRow& r, double v) { return r.t < v; });
  const TruthRow* best = nullptr;
  double best_d = tol;
  if (it != truth.end() && std::abs(it->t - t) <= best_d) {
    best = &*it;
    best_d = std::abs(it->t - t);
  }
  if (it != truth.begin() && std::abs(std::prev(it)->t - t) <= best_d) best = &*std::prev(it);
  return best;
}

RunResult run_filter(const Dataset& data, const RunOptions& opts, const NavState& x0) {
  if (data.imu.size() < 2) throw ConfigError("at least two IMU samples are required");
  if (x0.num_sensors() != data.num_sensors()) {
    throw ConfigError("initial state has " + std::to_string(x0.num_sensors()) +
                      " lever arms but the dataset has " + std::to_string(data.num_sensors()) +
                      " GNSS streams");
  }
  if (opts.record_stride == 0) throw ConfigError("record_stride must be >= 1");
  for (std::size_t k = 1; k < data.imu.size(); ++k) {
    if (!(data.imu[k].t > data.imu[k - 1].t)) {
      throw ConfigError("IMU timestamps must be strictly increasing (sample " +
                        std::to_string(k) + ")");
    }
  }

  std::vector<GnssSample> gnss;
  for (const auto& stream : data.gnss) gnss.insert(gnss.end(), stream.begin(), stream.end());
  std::stable_sort(gnss.begin(), gnss.end(), [](const GnssSample& a, const GnssSample& b) {
    return a.t < b.t || (a.t == b.t && a.sensor < b.sensor);
  });

  RunResult res;
  res.record.kind = opts.kind;
  res.record.num_sensors = data.num_sensors();
  const auto idx = layout::evaluated_indices(data.num_sensors());
  const double half_period = 0.5 * (data.imu[1].t - data.imu[0].t);

  auto filter = make_filter(opts, x0);
  filter->set_time(data.imu.front().t);

  auto apply = [&](const GnssSample& g) {
    const auto r = filter->update(g.sensor, g.pos, measurement_cov(g, opts.gnss_sigma));
    if (r == UpdateResult::kAccepted) {
      ++res.updates_accepted;
    } else {
      ++res.updates_rejected;
    }
    check_finite(*filter, g.t);
  };

  auto record = [&](double t) {
    eval::RunRow row;
    row.t = t;
    row.est = filter->estimate();
    if (const TruthRow* tr = nearest_truth(data.truth, t, half_period)) row.truth = tr->state;
    row.P_diag = filter->covariance().diagonal();
    if (opts.store_eval_cov) row.P_eval = sub_block(filter->covariance(), idx);
    res.record.rows.push_back(std::move(row));
  };

  std::size_t gi = 0;
  const double t_first = data.imu.front().t;
  for (; gi < gnss.size() && gnss[gi].t <= t_first; ++gi) {
    if (gnss[gi].t < t_first) {
      ++res.gnss_dropped;
      res.warnings.push_back("GNSS sample at t = " + std::to_string(gnss[gi].t) +
                             " precedes the first IMU sample; dropped");
    } else {
      apply(gnss[gi]);
    }
  }
  record(t_first);

  for (std::size_t k = 1; k < data.imu.size(); ++k) {
    const ImuSample& b = data.imu[k];
    auto advance = [&](double t1) {
      const double t0 = filter->time();
      const InputSegment seg{interpolate_input(data.imu, k - 1, t0),
                             interpolate_input(data.imu, k - 1, 0.5 * (t0 + t1)),
                             interpolate_input(data.imu, k - 1, t1)};
      filter->propagate(seg, t1 - t0);
      filter->set_time(t1);
      check_finite(*filter, t1);
    };

    for (; gi < gnss.size() && gnss[gi].t <= b.t; ++gi) {
      if (gnss[gi].t > filter->time()) advance(gnss[gi].t);
      apply(gnss[gi]);
    }
    if (b.t > filter->time()) advance(b.t);
    if (k % opts.record_stride == 0 || k + 1 == data.imu.size()) record(b.t);
  }

  for (; gi < gnss.size(); ++gi) {
    ++res.gnss_dropped;
    res.warnings.push_back("GNSS sample at t = " + std::to_string(gnss[gi].t) +
                           " follows the last IMU sample; dropped");
  }
  return res;
}

}  // namespace equinav::run
