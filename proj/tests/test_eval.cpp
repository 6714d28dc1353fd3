#include "doctest.h"

#include <cmath>
#include <numbers>

#include "equinav/eval.hpp"
#include "equinav/symmetry.hpp"
#include "oracles.hpp"

using namespace equinav;
using eval::FilterKind;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

eval::RunRow row(double t, const NavState& est, const NavState& truth) {
  eval::RunRow r;
  r.t = t;
  r.est = est;
  r.truth = truth;
  return r;
}

eval::RunRecord record(FilterKind kind, std::size_t n) {
  eval::RunRecord run;
  run.kind = kind;
  run.num_sensors = n;
  return run;
}

NavState with_yaw(double yaw) {
  NavState x = NavState::origin(2);
  x.R = Rot3::exp(Vec3(0, 0, yaw));
  return x;
}

/// Truth whose MEKF-style error relative to the origin estimate is e.
NavState mekf_truth_for(const VecX& e) {
  NavState x = NavState::origin(2);
  x.R = Rot3::exp(e.head<3>());
  x.p = e.segment<3>(3);
  x.calib[0] = e.segment<3>(6);
  x.calib[1] = e.segment<3>(9);
  return x;
}

/// Record of constant offset runs used by the compare fixtures.
eval::RunRecord offset_run(FilterKind kind, const Vec3& dp, double yaw, std::size_t rows) {
  eval::RunRecord run = record(kind, 2);
  for (std::size_t k = 0; k < rows; ++k) {
    NavState truth = NavState::origin(2);
    truth.calib = {Vec3(0.35, 0.41, 0.0), Vec3(-0.47, -0.41, 0.0)};
    NavState est = truth;
    est.p += dp;
    est.R = Rot3::exp(Vec3(0, 0, yaw));
    eval::RunRow r = row(0.1 * static_cast<double>(k), est, truth);
    r.P_eval = 0.01 * MatX::Identity(12, 12);
    run.rows.push_back(r);
  }
  return run;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("filter names") {
    CHECK(eval::parse_filter("eqf") == FilterKind::kEqf);
    CHECK(eval::parse_filter("mekf") == FilterKind::kMekf);
    CHECK(eval::filter_name(FilterKind::kMekf) == "mekf");
    CHECK_THROWS_AS(eval::parse_filter("iekf"), ConfigError);
  }

  TEST_CASE("position RMSE") {
    eval::RunRecord run = record(FilterKind::kEqf, 2);
    const NavState truth = NavState::origin(2);
    for (int k = 0; k < 5; ++k) run.rows.push_back(row(k, truth, truth));
    CHECK(eval::rmse_position(run, 0.0) == 0.0);

    for (auto& r : run.rows) r.est.p = Vec3(0.3, 0.4, 0.0);
    CHECK(eval::rmse_position(run, 0.0) == doctest::Approx(0.5).epsilon(1e-15));

    eval::RunRecord two = record(FilterKind::kEqf, 2);
    NavState off = truth;
    off.p = Vec3(1, 0, 0);
    two.rows = {row(0.0, off, truth), row(1.0, truth, truth)};
    CHECK(std::abs(eval::rmse_position(two, 0.0) - std::sqrt(0.5)) < 1e-15);
    // The window excludes rows before t0.
    CHECK(eval::rmse_position(two, 0.5) == 0.0);
    CHECK_THROWS_AS(eval::rmse_position(two, 2.0), std::domain_error);
  }

  TEST_CASE("attitude RMSE") {
    eval::RunRecord run = record(FilterKind::kEqf, 2);
    for (int k = 0; k < 4; ++k) run.rows.push_back(row(k, with_yaw(0.3), with_yaw(0.3)));
    CHECK(eval::rmse_attitude(run, 0.0) < 1e-6);

    for (auto& r : run.rows) r.est = with_yaw(0.3 + 10.0 * kDeg);
    CHECK(eval::rmse_attitude(run, 0.0) == doctest::Approx(10.0).epsilon(1e-9));

    eval::RunRecord mix = record(FilterKind::kEqf, 2);
    for (int k = 0; k < 6; ++k) {
      mix.rows.push_back(row(k, with_yaw(k % 2 ? 90.0 * kDeg : 0.0), with_yaw(0.0)));
    }
    CHECK(eval::rmse_attitude(mix, 0.0) == doctest::Approx(std::sqrt(4050.0)).epsilon(1e-9));
    CHECK(std::sqrt(4050.0) == doctest::Approx(63.64).epsilon(1e-4));
  }

  TEST_CASE("RMSE invariances") {
    oracle::Rng rng(70);
    eval::RunRecord run = record(FilterKind::kEqf, 2);
    for (int k = 0; k < 30; ++k) run.rows.push_back(row(0.1 * k, rng.state(2), rng.state(2)));
    const double pos = eval::rmse_position(run, 1.0);
    const double att = eval::rmse_attitude(run, 1.0);
    const auto cal = eval::rmse_calibration(run, 1.0);

    // A common rotation and translation of the global frame changes nothing.
    const Rot3 q = rng.rot();
    const Vec3 shift = rng.vec<3>(5.0);
    eval::RunRecord moved = run;
    for (auto& r : moved.rows) {
      for (NavState* x : {&r.est, &*r.truth}) {
        x->R = q * x->R;
        x->p = q * x->p + shift;
      }
    }
    CHECK(eval::rmse_position(moved, 1.0) == doctest::Approx(pos).epsilon(1e-12));
    CHECK(eval::rmse_attitude(moved, 1.0) == doctest::Approx(att).epsilon(1e-9));

    // Shifting time and t0 together changes nothing.
    eval::RunRecord later = run;
    for (auto& r : later.rows) r.t += 100.0;
    CHECK(eval::rmse_position(later, 101.0) == pos);
    CHECK(eval::rmse_calibration(later, 101.0) == cal);
  }

  TEST_CASE("evaluated error coordinates") {
    oracle::Rng rng(71);
    const NavState est = rng.state(2);
    CHECK(eval::evaluated_error(FilterKind::kEqf, est, est).norm() < 1e-12);
    CHECK(eval::evaluated_error(FilterKind::kMekf, est, est).norm() < 1e-12);

    const VecX e = rng.on_sphere(12, 0.1);
    const VecX got = eval::evaluated_error(FilterKind::kMekf, NavState::origin(2), mekf_truth_for(e));
    CHECK((got - e).cwiseAbs().maxCoeff() < 1e-14);

    // Equivariant coordinates of the error e = phi(X_hat^-1, xi).
    const VecX eps = rng.on_sphere(layout::dim(2), 0.1);
    const NavState truth = sym::act(sym::from_origin(est), sym::coords_inv(eps));
    const VecX ge = eval::evaluated_error(FilterKind::kEqf, est, truth);
    CHECK((ge.head<3>() - eps.segment<3>(layout::kRot)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ge.segment<3>(3) - eps.segment<3>(layout::kPos)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ge.tail<6>() - eps.tail<6>()).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("NEES definition") {
    eval::RunRecord run = record(FilterKind::kMekf, 2);
    eval::RunRow zero = row(0.0, NavState::origin(2), NavState::origin(2));
    zero.P_eval = MatX::Identity(12, 12);
    CHECK(eval::row_nees(FilterKind::kMekf, zero) == 0.0);

    eval::RunRow unit = row(0.0, NavState::origin(2), mekf_truth_for(VecX::Constant(12, 0.1)));
    unit.P_eval = 0.01 * MatX::Identity(12, 12);
    CHECK(eval::row_nees(FilterKind::kMekf, unit) == doctest::Approx(1.0).epsilon(1e-12));

    eval::RunRow overconfident = unit;
    overconfident.P_eval *= 0.01;
    CHECK(eval::row_nees(FilterKind::kMekf, overconfident) ==
          doctest::Approx(100.0).epsilon(1e-12));

    eval::RunRow singular = unit;
    singular.P_eval(3, 3) = 0.0;
    CHECK_THROWS_AS(eval::row_nees(FilterKind::kMekf, singular), std::domain_error);

    eval::RunRow no_truth = unit;
    no_truth.truth.reset();
    CHECK(std::isnan(eval::row_nees(FilterKind::kMekf, no_truth)));

    eval::RunRow cached = unit;
    cached.P_eval.resize(0, 0);
    cached.nees = 0.7;
    CHECK(eval::row_nees(FilterKind::kMekf, cached) == 0.7);
  }

  TEST_CASE("consistent linear-Gaussian filter has unit energy") {
    // Kalman filter on a 12-dimensional random walk observed directly; its
    // error is embedded into navigation states so the library computes NEES.
    oracle::Rng rng(72);
    const Eigen::Index n = 12;
    const double q = 0.01, r = 0.04;
    VecX x = VecX::Zero(n), x_hat = VecX::Zero(n);
    MatX p = 0.01 * MatX::Identity(n, n);
    for (Eigen::Index j = 0; j < n; ++j) x[j] = 0.1 * rng.normal();

    eval::RunRecord run = record(FilterKind::kMekf, 2);
    for (int k = 0; k < 10000; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) x[j] += std::sqrt(q) * rng.normal();
      p += q * MatX::Identity(n, n);
      VecX z(n);
      for (Eigen::Index j = 0; j < n; ++j) z[j] = x[j] + std::sqrt(r) * rng.normal();
      const MatX gain = p * (p + r * MatX::Identity(n, n)).inverse();
      x_hat += gain * (z - x_hat);
      p = (MatX::Identity(n, n) - gain) * p;
      p = 0.5 * (p + p.transpose()).eval();

      eval::RunRow rr = row(0.01 * k, NavState::origin(2), mekf_truth_for(x - x_hat));
      rr.P_eval = p;
      run.rows.push_back(rr);
    }
    const eval::Energy en = eval::filter_energy(run, 0.0);
    CHECK(en.per_sample.size() == 10000);
    CHECK(en.mean >= 0.8);
    CHECK(en.mean <= 1.2);

    for (auto& rr : run.rows) rr.P_eval *= 0.01;
    const double over = eval::filter_energy(run, 0.0).mean;
    CHECK(over == doctest::Approx(100.0 * en.mean).epsilon(1e-9));
  }

  TEST_CASE("parallel NEES matches the serial reference") {
    oracle::Rng rng(73);
    for (FilterKind kind : {FilterKind::kEqf, FilterKind::kMekf}) {
      eval::RunRecord run = record(kind, 2);
      for (int k = 0; k < 3000; ++k) {
        const NavState est = rng.state(2);
        NavState truth = est;
        truth.p += rng.vec<3>(0.1);
        truth.R = est.R * Rot3::exp(rng.vec<3>(0.05));
        eval::RunRow r = row(0.005 * k, est, truth);
        const MatX a = rng.vecx(144, 0.1).reshaped(12, 12);
        r.P_eval = a * a.transpose() + 0.01 * MatX::Identity(12, 12);
        if (k % 100 == 0) r.truth.reset();
        run.rows.push_back(r);
      }
      const auto par = eval::nees_series(run);
      const auto ser = eval::nees_series_serial(run);
      REQUIRE(par.size() == ser.size());
      for (std::size_t k = 0; k < par.size(); ++k) {
        if (std::isnan(ser[k])) {
          CHECK(std::isnan(par[k]));
        } else {
          CHECK(par[k] == ser[k]);
        }
      }
    }
  }

  TEST_CASE("summary") {
    const eval::RunRecord run = offset_run(FilterKind::kMekf, Vec3(0.3, 0.4, 0.0), 10.0 * kDeg, 50);
    const eval::Summary s = eval::summarize(run, 2.0);
    CHECK(s.filter == "mekf");
    CHECK(s.t0 == 2.0);
    CHECK(s.samples == 30);
    CHECK(s.rmse_pos == doctest::Approx(0.5));
    CHECK(s.rmse_att == doctest::Approx(10.0));
    REQUIRE(s.rmse_calib.size() == 2);
    CHECK(s.rmse_calib[0] == 0.0);
    CHECK(s.final_calib[1] == Vec3(-0.47, -0.41, 0.0));
    CHECK(s.final_calib_error[0] == 0.0);
    CHECK(std::isfinite(s.nees_mean));
  }

  TEST_CASE("verdicts") {
    CHECK(eval::verdict("m", 1.0, 2.0).best == "eqf");
    CHECK(eval::verdict("m", 2.0, 1.0).best == "mekf");
    CHECK(eval::verdict("m", 1.0, 1.0).best == "tie");
    CHECK(eval::verdict("nees", 1.5, 0.5, true).best == "eqf");
    CHECK(eval::verdict("nees", 3.0, 0.5, true).best == "mekf");
    CHECK(eval::verdict("nees", 2.0, 0.5, true).best == "tie");
    CHECK(eval::verdict("m", std::nan(""), 1.0).best == "mekf");
  }

  TEST_CASE("compare identical runs") {
    const eval::RunRecord a = offset_run(FilterKind::kEqf, Vec3(0.1, 0, 0), 0.0, 40);
    eval::RunRecord b = a;
    b.kind = FilterKind::kMekf;
    // Zero attitude and lever-arm error makes both error coordinates agree.
    const eval::Comparison c = eval::compare_runs(a, b, 1.0);
    CHECK(c.t0 == 1.0);
    for (const auto& v : c.verdicts) {
      INFO(v.metric);
      CHECK(v.best == "tie");
    }
  }

  TEST_CASE("compare known offsets") {
    const eval::RunRecord a = offset_run(FilterKind::kEqf, Vec3(0.3, 0.4, 0.0), 2.0 * kDeg, 40);
    const eval::RunRecord b = offset_run(FilterKind::kMekf, Vec3(0.6, 0.8, 0.0), 1.0 * kDeg, 40);
    const eval::Comparison c = eval::compare_runs(a, b, 0.0);
    REQUIRE(c.verdicts.size() == 5);
    CHECK(c.verdicts[0].metric == "rmse_pos");
    CHECK(c.verdicts[0].eqf == doctest::Approx(0.5));
    CHECK(c.verdicts[0].mekf == doctest::Approx(1.0));
    CHECK(c.verdicts[0].best == "eqf");
    CHECK(c.verdicts[1].metric == "rmse_att");
    CHECK(c.verdicts[1].eqf == doctest::Approx(2.0));
    CHECK(c.verdicts[1].mekf == doctest::Approx(1.0));
    CHECK(c.verdicts[1].best == "mekf");
    CHECK(c.verdicts[2].metric == "rmse_calib_1");
    CHECK(c.verdicts[2].best == "tie");
    CHECK(c.verdicts[4].metric == "nees_mean");

    eval::RunRecord shifted = b;
    shifted.rows[3].t += 0.01;
    CHECK_THROWS_AS(eval::compare_runs(a, shifted, 0.0), ConfigError);
    eval::RunRecord shorter = b;
    shorter.rows.pop_back();
    CHECK_THROWS_AS(eval::compare_runs(a, shorter, 0.0), ConfigError);
  }
}
