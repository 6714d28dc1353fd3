#include "equinav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "equinav/symmetry.hpp"

namespace equinav::eval {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

template <class F>
double rms_over_window(const RunRecord& run, double t0, F&& err) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& row : run.rows) {
    if (row.t < t0 || !row.truth) continue;
    const double e = err(row);
    acc += e * e;
    ++n;
  }
  if (n == 0) throw std::domain_error("evaluation window is empty");
  return std::sqrt(acc / static_cast<double>(n));
}

double closeness_to_one(double x) { return std::abs(std::log(x)); }

}  // namespace

std::string filter_name(FilterKind k) { return k == FilterKind::kEqf ? "eqf" : "mekf"; }

FilterKind parse_filter(const std::string& name) {
  if (name == "eqf") return FilterKind::kEqf;
  if (name == "mekf") return FilterKind::kMekf;
  throw ConfigError("unknown filter '" + name + "'");
}

double rmse_position(const RunRecord& run, double t0) {
  return rms_over_window(run, t0, [](const RunRow& r) { return (r.est.p - r.truth->p).norm(); });
}

double rmse_attitude(const RunRecord& run, double t0) {
  return rms_over_window(run, t0, [](const RunRow& r) {
    const Mat3 rel = r.est.R.matrix().transpose() * r.truth->R.matrix();
    const double c = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
    return std::acos(c) * kRadToDeg;
  });
}

std::vector<double> rmse_calibration(const RunRecord& run, double t0) {
  std::vector<double> out;
  for (std::size_t i = 0; i < run.num_sensors; ++i) {
    out.push_back(rms_over_window(run, t0, [i](const RunRow& r) {
      return (r.est.calib.at(i) - r.truth->calib.at(i)).norm();
    }));
  }
  return out;
}

VecX evaluated_error(FilterKind kind, const NavState& est, const NavState& truth) {
  const std::size_t n = est.num_sensors();
  VecX e(6 + 3 * static_cast<Eigen::Index>(n));
  if (kind == FilterKind::kEqf) {
    const sym::GroupElement x_hat = sym::from_origin(est);
    const VecX eps = sym::coords(sym::act(sym::inverse(x_hat), truth));
    e.head<3>() = eps.segment<3>(layout::kRot);
    e.segment<3>(3) = eps.segment<3>(layout::kPos);
    for (std::size_t i = 0; i < n; ++i) e.segment<3>(6 + 3 * i) = eps.segment<3>(layout::calib(i));
  } else {
    e.head<3>() = so3::log(est.R.matrix().transpose() * truth.R.matrix());
    e.segment<3>(3) = truth.p - est.p;
    for (std::size_t i = 0; i < n; ++i) e.segment<3>(6 + 3 * i) = truth.calib[i] - est.calib[i];
  }
  return e;
}

double row_nees(FilterKind kind, const RunRow& row) {
  if (!row.truth) return std::numeric_limits<double>::quiet_NaN();
  if (row.P_eval.size() == 0) return row.nees;
  VecX e;
  try {
    e = evaluated_error(kind, row.est, *row.truth);
  } catch (const BranchError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const Eigen::LDLT<MatX> ldlt(row.P_eval);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    throw std::domain_error("NEES: singular evaluated covariance");
  }
  return e.dot(ldlt.solve(e)) / static_cast<double>(e.size());
}

std::vector<double> nees_series_serial(const RunRecord& run) {
  std::vector<double> out(run.rows.size());
  for (std::size_t k = 0; k < run.rows.size(); ++k) out[k] = row_nees(run.kind, run.rows[k]);
  return out;
}

std::vector<double> nees_series(const RunRecord& run) {
  std::vector<double> out(run.rows.size());
  const auto n = static_cast<std::ptrdiff_t>(run.rows.size());
  bool singular = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      out[k] = row_nees(run.kind, run.rows[k]);
    } catch (const std::domain_error&) {
#pragma omp atomic write
      singular = true;
    }
  }
  if (singular) throw std::domain_error("NEES: singular evaluated covariance");
  return out;
}

Energy filter_energy(const RunRecord& run, double t0) {
  const std::vector<double> all = nees_series(run);
  Energy en;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < run.rows.size(); ++k) {
    if (run.rows[k].t < t0) continue;
    en.per_sample.push_back(all[k]);
    if (std::isfinite(all[k])) {
      acc += all[k];
      ++n;
    }
  }
  if (n > 0) en.mean = acc / static_cast<double>(n);
  return en;
}

Summary summarize(const RunRecord& run, double t0) {
  Summary s;
  s.filter = filter_name(run.kind);
  s.t0 = t0;
  s.rmse_pos = rmse_position(run, t0);
  s.rmse_att = rmse_attitude(run, t0);
  s.rmse_calib = rmse_calibration(run, t0);
  s.nees_mean = filter_energy(run, t0).mean;
  for (const auto& row : run.rows) s.samples += (row.t >= t0 && row.truth) ? 1 : 0;
  const RunRow& last = run.rows.back();
  s.final_calib = last.est.calib;
  for (std::size_t i = 0; i < run.num_sensors; ++i) {
    s.final_calib_error.push_back(last.truth ? (last.est.calib[i] - last.truth->calib[i]).norm()
                                             : std::numeric_limits<double>::quiet_NaN());
  }
  return s;
}

MetricVerdict verdict(const std::string& metric, double eqf, double mekf, bool closer_to_one) {
  MetricVerdict v{metric, eqf, mekf, "tie"};
  const double a = closer_to_one ? closeness_to_one(eqf) : eqf;
  const double b = closer_to_one ? closeness_to_one(mekf) : mekf;
  if (std::isnan(a) && std::isnan(b)) return v;
  if (std::isnan(b) || a < b - 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) {
    v.best = "eqf";
  } else if (std::isnan(a) || b < a - 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) {
    v.best = "mekf";
  }
  return v;
}

Comparison compare_runs(const RunRecord& eqf_run, const RunRecord& mekf_run, double t0) {
  if (eqf_run.rows.size() != mekf_run.rows.size() ||
      eqf_run.num_sensors != mekf_run.num_sensors) {
    throw ConfigError("compare: runs cover different scenarios");
  }
  for (std::size_t k = 0; k < eqf_run.rows.size(); ++k) {
    if (std::abs(eqf_run.rows[k].t - mekf_run.rows[k].t) > 1e-9) {
      throw ConfigError("compare: run timestamps differ at row " + std::to_string(k));
    }
  }
  Comparison c;
  c.t0 = t0;
  c.eqf = summarize(eqf_run, t0);
  c.mekf = summarize(mekf_run, t0);
  c.verdicts.push_back(verdict("rmse_pos", c.eqf.rmse_pos, c.mekf.rmse_pos));
  c.verdicts.push_back(verdict("rmse_att", c.eqf.rmse_att, c.mekf.rmse_att));
  for (std::size_t i = 0; i < c.eqf.rmse_calib.size(); ++i) {
    c.verdicts.push_back(verdict("rmse_calib_" + std::to_string(i + 1), c.eqf.rmse_calib[i],
                                 c.mekf.rmse_calib[i]));
  }
  c.verdicts.push_back(verdict("nees_mean", c.eqf.nees_mean, c.mekf.nees_mean, true));
  return c;
}

}  // namespace equinav::eval
