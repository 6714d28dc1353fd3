#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "equinav/eqf.hpp"
#include "equinav/mekf.hpp"
#include "oracles.hpp"

using namespace equinav;

namespace {

double max_abs(const MatX& m) { return m.cwiseAbs().maxCoeff(); }

const Vec3 kGravity(0.0, 0.0, 9.81);

NoiseConfig default_cfg(std::size_t n) {
  NoiseConfig cfg;
  cfg.p0_diag = make_p0_diag(PriorStd{}, n);
  return cfg;
}

double min_eig(const MatX& p) {
  return Eigen::SelfAdjointEigenSolver<MatX>(p).eigenvalues().minCoeff();
}

/// Applies an error vector with R = R_hat exp(dtheta^) and additive other blocks.
NavState inject(const NavState& x, const VecX& dx) {
  NavState out = x;
  out.R = x.R * Rot3::exp(dx.segment<3>(layout::kRot));
  out.v += dx.segment<3>(layout::kVel);
  out.p += dx.segment<3>(layout::kPos);
  out.b_gyro += dx.segment<3>(layout::kBiasGyro);
  out.b_acc += dx.segment<3>(layout::kBiasAcc);
  for (std::size_t i = 0; i < out.calib.size(); ++i) out.calib[i] += dx.segment<3>(layout::calib(i));
  return out;
}

}  // namespace

TEST_SUITE("mekf") {
  TEST_CASE("initialization mirrors the equivariant filter") {
    const NoiseConfig cfg = default_cfg(2);
    const mekf::MekfState ms = mekf::init(2, cfg);
    const eqf::FilterState fs = eqf::init(2, cfg);
    CHECK(max_abs(ms.P - fs.P) == 0.0);
    CHECK(oracle::state_distance(mekf::state_estimate(ms), eqf::state_estimate(fs)) == 0.0);
    CHECK(max_abs(ms.nominal.calib[0]) == 0.0);
    CHECK(max_abs(ms.nominal.calib[1]) == 0.0);
    CHECK_THROWS_AS(mekf::init(1, cfg), ConfigError);

    oracle::Rng rng(60);
    const NavState xi = rng.state(2);
    CHECK(oracle::state_distance(mekf::state_estimate(mekf::init_at(xi, cfg)), xi) == 0.0);
  }

  TEST_CASE("zero dynamics and hover") {
    NoiseConfig cfg = default_cfg(2);
    cfg.gravity.setZero();
    const mekf::MekfState still = mekf::propagate(mekf::init(2, cfg), ImuInput{}, 0.01);
    CHECK(oracle::state_distance(still.nominal, NavState::origin(2)) == 0.0);

    mekf::MekfState ms = mekf::init(2, default_cfg(2));
    for (int k = 0; k < 200; ++k) ms = mekf::propagate(ms, ImuInput{Vec3::Zero(), -kGravity}, 0.005);
    CHECK(max_abs(ms.nominal.p) < 1e-9);
    CHECK(max_abs(ms.nominal.v) < 1e-9);
    CHECK_THROWS_AS(mekf::propagate(ms, ImuInput{}, 0.0), std::invalid_argument);
  }

  TEST_CASE("nominal propagation matches direct integration") {
    oracle::Rng rng(61);
    const NoiseConfig cfg = default_cfg(2);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const NavState xi = rng.state(2);
      const ImuInput u0 = rng.input(), u1 = rng.input();
      const oracle::InsOde ode{kGravity, u0, u1, 1e-3};
      const mekf::MekfState ms = mekf::propagate(mekf::init_at(xi, cfg), u0, u1, 1e-3);
      worst = std::max(worst, oracle::state_distance(ms.nominal, ode.integrate(xi, 1e-3, 20)));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("both filters propagate the same mean") {
    oracle::Rng rng(62);
    const NoiseConfig cfg = default_cfg(2);
    const NavState xi = rng.state(2);
    mekf::MekfState ms = mekf::init_at(xi, cfg);
    eqf::FilterState fs = eqf::init_at(xi, cfg);
    ImuInput u = rng.input();
    for (int k = 0; k < 200; ++k) {
      const ImuInput next = rng.input();
      ms = mekf::propagate(ms, u, next, 0.005);
      fs = eqf::propagate(fs, u, next, 0.005);
      u = next;
    }
    CHECK(oracle::state_distance(ms.nominal, eqf::state_estimate(fs)) < 1e-8);
  }

  TEST_CASE("covariance grows under propagation") {
    oracle::Rng rng(63);
    mekf::MekfState ms = mekf::init(2, default_cfg(2));
    for (int k = 0; k < 20; ++k) {
      const double before = ms.P.trace();
      ms = mekf::propagate(ms, rng.input(), 0.005);
      CHECK(ms.P.trace() > before);
    }
  }

  TEST_CASE("error dynamics match the finite difference of the nominal flow") {
    oracle::Rng rng(64);
    const double dt = 1e-5;
    for (int k = 0; k < 50; ++k) {
      const NavState x = rng.state(2);
      const ImuInput u = rng.input();
      const VecX dx = rng.on_sphere(layout::dim(2), 1e-3);
      const NavState xt = inject(x, dx);
      const NavState x1 = mekf::integrate_nominal(x, InputSegment::constant(u), dt, kGravity);
      const NavState xt1 = mekf::integrate_nominal(xt, InputSegment::constant(u), dt, kGravity);
      VecX dx1(layout::dim(2));
      dx1.segment<3>(layout::kRot) = so3::log(x1.R.matrix().transpose() * xt1.R.matrix());
      dx1.segment<3>(layout::kVel) = xt1.v - x1.v;
      dx1.segment<3>(layout::kPos) = xt1.p - x1.p;
      dx1.segment<3>(layout::kBiasGyro) = xt1.b_gyro - x1.b_gyro;
      dx1.segment<3>(layout::kBiasAcc) = xt1.b_acc - x1.b_acc;
      for (std::size_t i = 0; i < 2; ++i) dx1.segment<3>(layout::calib(i)) = xt1.calib[i] - x1.calib[i];
      const VecX fd = (dx1 - dx) / dt;
      mekf::MekfState ms = mekf::init_at(x, default_cfg(2));
      const VecX lin = mekf::error_dynamics(ms, u) * dx;
      CHECK((fd - lin).norm() <= 0.05 * lin.norm() + 1e-8);
    }
  }

  TEST_CASE("measurement Jacobian matches the finite difference") {
    oracle::Rng rng(65);
    const double h = 1e-6;
    const NavState x = rng.state(2);
    const mekf::MekfState ms = mekf::init_at(x, default_cfg(2));
    for (std::size_t i = 0; i < 2; ++i) {
      const MatX jac = mekf::measurement_jacobian(ms, i);
      for (Eigen::Index c = 0; c < jac.cols(); ++c) {
        VecX e = VecX::Zero(jac.cols());
        e[c] = h;
        const Vec3 fd = (inject(x, e).antenna_position(i) - inject(x, -e).antenna_position(i)) / (2 * h);
        CHECK(max_abs(fd - jac.col(c)) < 1e-8);
      }
    }
    CHECK_THROWS_AS(mekf::measurement_jacobian(ms, 2), std::out_of_range);
  }

  TEST_CASE("perfect measurement gives zero correction") {
    oracle::Rng rng(66);
    const NavState x = rng.state(2);
    const mekf::MekfState ms = mekf::init_at(x, default_cfg(2));
    const mekf::UpdateOutcome out = mekf::update(ms, 1, x.antenna_position(1), 0.01 * Mat3::Identity());
    REQUIRE(out.status == mekf::UpdateStatus::kAccepted);
    CHECK(max_abs(out.correction) < 1e-15);
    CHECK(oracle::state_distance(out.state.nominal, x) < 1e-15);
  }

  TEST_CASE("scalar-gain correction") {
    oracle::Rng rng(67);
    const NavState x = rng.state(2);
    const double sigma = 0.3, r = 0.1;
    mekf::MekfState ms = mekf::init_at(x, default_cfg(2));
    ms.P = sigma * sigma * MatX::Identity(layout::dim(2), layout::dim(2));
    const Vec3 offset(0.1, 0.0, 0.0);
    const mekf::UpdateOutcome out =
        mekf::update(ms, 0, x.antenna_position(0) + offset, r * r * Mat3::Identity());
    REQUIRE(out.status == mekf::UpdateStatus::kAccepted);
    CHECK(max_abs(out.residual - offset) < 1e-12);

    // K r = s^2 H^T (s^2 H H^T + r^2 I)^-1 r.
    const MatX h = mekf::measurement_jacobian(ms, 0);
    const Mat3 s = sigma * sigma * h * h.transpose() + r * r * Mat3::Identity();
    const VecX expect = sigma * sigma * h.transpose() * s.inverse() * offset;
    CHECK(max_abs(out.correction - expect) < 1e-12);
    // The correction lies in the row space of H and reduces the residual.
    CHECK(std::abs(out.correction.normalized().dot(
              (h.transpose() * s.inverse() * offset).normalized()) - 1.0) < 1e-12);
    CHECK((out.state.nominal.antenna_position(0) - (x.antenna_position(0) + offset)).norm() <
          offset.norm());
  }

  TEST_CASE("Joseph form keeps the covariance symmetric positive definite") {
    oracle::Rng rng(68);
    mekf::MekfState ms = mekf::init(2, default_cfg(2));
    for (int k = 0; k < 400; ++k) {
      ms = mekf::propagate(ms, rng.input(), 0.005);
      if (k % 20 == 0) {
        const auto out = mekf::update(ms, (k / 20) % 2, rng.vec<3>(2.0), 0.0025 * Mat3::Identity());
        CHECK(out.state.P.trace() <= ms.P.trace());
        ms = out.state;
      }
      REQUIRE(min_eig(ms.P) > 1e-12);
      REQUIRE(max_abs(ms.P - ms.P.transpose()) == 0.0);
    }
  }

  TEST_CASE("rejected updates leave the state untouched") {
    mekf::Options opts;
    opts.gate = 1.0;
    const mekf::MekfState ms = mekf::init(2, default_cfg(2), opts);
    const auto out = mekf::update(ms, 0, Vec3(100, 0, 0), 1e-4 * Mat3::Identity());
    CHECK(out.status == mekf::UpdateStatus::kRejectedGate);
    CHECK(oracle::state_distance(out.state.nominal, ms.nominal) == 0.0);
    CHECK_THROWS_AS(mekf::update(ms, 0, Vec3::Zero(), -Mat3::Identity()), std::invalid_argument);
  }

  TEST_CASE("calibration passthrough") {
    NavState x = NavState::origin(2);
    x.calib[0] = Vec3(0.35, 0.41, 0.0);
    x.calib[1] = Vec3(-0.47, -0.41, 0.0);
    const mekf::MekfState ms = mekf::init_at(x, default_cfg(2));
    CHECK(max_abs(mekf::state_estimate(ms).calib[0] - x.calib[0]) == 0.0);
    CHECK(max_abs(mekf::state_estimate(ms).calib[1] - x.calib[1]) == 0.0);
  }
}
