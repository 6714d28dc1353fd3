#include "doctest.h"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "equinav/eqf.hpp"
#include "equinav/integrator.hpp"
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

MatX random_spd(oracle::Rng& rng, Eigen::Index n) {
  const MatX a = rng.vecx(n * n, 1.0).reshaped(n, n);
  return a * a.transpose() + 0.1 * MatX::Identity(n, n);
}

double min_eig(const MatX& p) {
  return Eigen::SelfAdjointEigenSolver<MatX>(p).eigenvalues().minCoeff();
}

/// Observer flow X' = X Lambda(phi(X, origin), u) over dt.
sym::GroupElement observer_step(const sym::GroupElement& x, const ImuInput& u, double dt) {
  const NavState origin = NavState::origin(x.num_sensors());
  auto field = [&](double, const sym::GroupElement& y) -> VecX {
    return sym::lift(sym::act(y, origin), u, kGravity).to_vector();
  };
  auto exp_map = [](const VecX& v) { return sym::exp(sym::GroupTangent::from_vector(v)); };
  return cf4_step(x, dt, field, exp_map, sym::compose);
}

}  // namespace

TEST_SUITE("eqf") {
  TEST_CASE("initialization") {
    const NoiseConfig cfg = default_cfg(2);
    const eqf::FilterState fs = eqf::init(2, cfg);
    CHECK(oracle::state_distance(eqf::state_estimate(fs), NavState::origin(2)) == 0.0);
    CHECK(max_abs(fs.P - MatX(cfg.p0_diag.asDiagonal())) == 0.0);
    CHECK_THROWS_AS(eqf::init(3, cfg), ConfigError);

    oracle::Rng rng(40);
    const NavState xi = rng.state(2);
    CHECK(oracle::state_distance(eqf::state_estimate(eqf::init_at(xi, cfg)), xi) < 1e-12);
  }

  TEST_CASE("zero dynamics are a fixed point") {
    NoiseConfig cfg = default_cfg(2);
    cfg.gravity.setZero();
    const eqf::FilterState fs = eqf::init(2, cfg);
    const eqf::FilterState next = eqf::propagate(fs, ImuInput{}, 0.01);
    CHECK(oracle::state_distance(eqf::state_estimate(next), NavState::origin(2)) == 0.0);
    CHECK(next.P.trace() > fs.P.trace());
    CHECK(next.t_last == doctest::Approx(0.01));
    CHECK_THROWS_AS(eqf::propagate(fs, ImuInput{}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(eqf::propagate(fs, ImuInput{}, -1.0), std::invalid_argument);
  }

  TEST_CASE("hover equilibrium") {
    const eqf::FilterState fs = eqf::init(2, default_cfg(2));
    const ImuInput hover{Vec3::Zero(), -kGravity};
    eqf::FilterState cur = fs;
    for (int k = 0; k < 200; ++k) cur = eqf::propagate(cur, hover, 0.005);
    const NavState x = eqf::state_estimate(cur);
    CHECK(max_abs(x.p) < 1e-9);
    CHECK(max_abs(x.v) < 1e-9);
    CHECK(max_abs(x.R.matrix() - Mat3::Identity()) < 1e-12);
  }

  TEST_CASE("one step matches direct integration") {
    oracle::Rng rng(41);
    const NoiseConfig cfg = default_cfg(2);
    const double dt = 1e-3;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const NavState xi = rng.state(2);
      const ImuInput u0 = rng.input(), u1 = rng.input();
      const eqf::FilterState fs = eqf::init_at(xi, cfg);
      const oracle::InsOde ode{kGravity, u0, u1, dt};
      const NavState expect = ode.integrate(xi, dt, 20);
      worst = std::max(worst, oracle::state_distance(eqf::state_estimate(eqf::propagate(fs, u0, u1, dt)), expect));
      const oracle::InsOde held{kGravity, u0, u0, dt};
      worst = std::max(worst, oracle::state_distance(eqf::state_estimate(eqf::propagate(fs, u0, dt)),
                                                     held.integrate(xi, dt, 20)));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("first-order scheme converges at second order per step") {
    oracle::Rng rng(42);
    eqf::Options opts;
    opts.scheme = eqf::PropagationScheme::kFirstOrder;
    const NavState xi = rng.state(2);
    const ImuInput u = rng.input();
    const eqf::FilterState fs = eqf::init_at(xi, default_cfg(2), opts);
    const oracle::InsOde ode{kGravity, u, u, 1.0};
    const double e1 = oracle::state_distance(eqf::state_estimate(eqf::propagate(fs, u, 1e-2)),
                                             ode.integrate(xi, 1e-2, 50));
    const double e2 = oracle::state_distance(eqf::state_estimate(eqf::propagate(fs, u, 5e-3)),
                                             ode.integrate(xi, 5e-3, 50));
    CHECK(e2 < 0.3 * e1);
  }

  TEST_CASE("constant-rate rotation") {
    const eqf::FilterState fs = eqf::init(2, default_cfg(2));
    const ImuInput u{Vec3(0, 0, 1), -kGravity};
    eqf::FilterState cur = fs;
    for (int k = 0; k < 200; ++k) cur = eqf::propagate(cur, u, 0.005);
    const Mat3 r = eqf::state_estimate(cur).R.matrix();
    CHECK(std::abs(std::atan2(r(1, 0), r(0, 0)) - 1.0) < 1e-4);
    CHECK(max_abs(eqf::state_estimate(cur).p) < 1e-9);
  }

  TEST_CASE("A at the identity") {
    const eqf::FilterState fs = eqf::init(2, default_cfg(2));
    const MatX a = eqf::build_A(fs, ImuInput{});
    CHECK(max_abs(a.block<3, 3>(layout::kVel, layout::kRot) - so3::wedge(kGravity)) == 0.0);
    CHECK(max_abs(a.block<3, 3>(layout::kPos, layout::kVel) - Mat3::Identity()) == 0.0);
    CHECK(max_abs(a.block<6, 6>(layout::kRot, layout::kBiasGyro) - Mat6::Identity()) == 0.0);
    CHECK(max_abs(a.block<3, 6>(layout::kPos, layout::kBiasGyro)) == 0.0);
    CHECK(max_abs(a.block(layout::kCore, layout::kCore, 6, 6)) == 0.0);
  }

  TEST_CASE("A sparsity") {
    oracle::Rng rng(43);
    eqf::FilterState fs = eqf::init(2, default_cfg(2));
    fs.X = rng.group(2);
    const MatX a = eqf::build_A(fs, rng.input());
    const Eigen::Index dim = layout::dim(2);
    // Lever-arm columns couple only within their own block.
    for (std::size_t i = 0; i < 2; ++i) {
      const Eigen::Index c = layout::calib(i);
      for (Eigen::Index r = 0; r < dim; ++r) {
        if (r >= c && r < c + 3) continue;
        CHECK(max_abs(a.block(r, c, 1, 3)) == 0.0);
        CHECK(max_abs(a.block(c, r, 3, 1)) == 0.0);
      }
    }
    // Bias rows only see the bias columns.
    CHECK(max_abs(a.block(layout::kBiasGyro, 0, 6, 9)) == 0.0);
    CHECK(max_abs(a.block(layout::kBiasGyro, layout::kCore, 6, dim - layout::kCore)) == 0.0);
  }

  TEST_CASE("A matches the coupled-flow finite difference") {
    oracle::Rng rng(44);
    const double dt = 1e-5;
    int passed = 0;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      eqf::FilterState fs = eqf::init(2, default_cfg(2));
      fs.X = rng.group(2);
      const ImuInput u = rng.input();
      const VecX eps = rng.on_sphere(layout::dim(2), 1e-3);
      const NavState xi = sym::act(fs.X, sym::coords_inv(eps));

      const oracle::InsOde ode{kGravity, u, u, dt};
      const NavState xi1 = ode.integrate(xi, dt, 4);
      const sym::GroupElement x1 = observer_step(fs.X, u, dt);
      const VecX eps1 = sym::coords(sym::act(sym::inverse(x1), xi1));

      const VecX fd = (eps1 - eps) / dt;
      const VecX lin = eqf::build_A(fs, u) * eps;
      const double err = (fd - lin).norm();
      worst = std::max(worst, err / lin.norm());
      if (err <= 0.05 * lin.norm() + 1e-8) ++passed;
    }
    INFO("worst relative error " << worst);
    CHECK(passed == 100);
  }

  TEST_CASE("C formula") {
    oracle::Rng rng(45);
    eqf::FilterState fs = eqf::init(2, default_cfg(2));
    {
      const MatX c = eqf::build_C(fs, 0, Vec3::Zero());
      CHECK(max_abs(c.block<3, 3>(0, layout::kRot)) == 0.0);
      CHECK(max_abs(c.block<3, 3>(0, layout::kPos) + Mat3::Identity()) == 0.0);
      CHECK(max_abs(c.block<3, 3>(0, layout::calib(0)) - Mat3::Identity()) == 0.0);
      CHECK(max_abs(c.block<3, 3>(0, layout::calib(1))) == 0.0);
    }
    fs.X = rng.group(2);
    const Vec3 y = rng.vec<3>(3.0);
    for (std::size_t i = 0; i < 2; ++i) {
      const MatX c = eqf::build_C(fs, i, y);
      MatX expect = MatX::Zero(3, layout::dim(2));
      expect.block<3, 3>(0, layout::kRot) = 0.5 * oracle::skew(y + fs.X.C.pos - fs.X.d[i]);
      expect.block<3, 3>(0, layout::kPos) = -Mat3::Identity();
      expect.block<3, 3>(0, layout::calib(i)) = Mat3::Identity();
      CHECK(max_abs(c - expect) < 1e-15);
    }
    const MatX c2 = eqf::build_C(fs, 1, y);
    CHECK(max_abs(c2.block<3, 3>(0, layout::calib(0))) == 0.0);
    CHECK(max_abs(c2.block<3, 3>(0, layout::calib(1)) - Mat3::Identity()) == 0.0);

    const Vec3 base = y + fs.X.C.pos - fs.X.d[0];
    const Vec3 y2 = 2.0 * base - fs.X.C.pos + fs.X.d[0];
    const Mat3 u5 = eqf::build_C(fs, 0, y).block<3, 3>(0, layout::kRot);
    const Mat3 u5_doubled = eqf::build_C(fs, 0, y2).block<3, 3>(0, layout::kRot);
    CHECK(max_abs(u5_doubled - 2.0 * u5) < 1e-14);
    CHECK_THROWS_AS(eqf::build_C(fs, 2, y), std::out_of_range);
  }

  TEST_CASE("C linearizes the residual") {
    // With y generated by the true state, C eps approximates the residual to
    // second order in eps.
    oracle::Rng rng(46);
    for (int k = 0; k < 50; ++k) {
      eqf::FilterState fs = eqf::init(2, default_cfg(2));
      fs.X = rng.group(2);
      const VecX dir = rng.on_sphere(layout::dim(2), 1.0);
      double prev = 0.0;
      for (double s : {1e-2, 5e-3}) {
        const VecX eps = s * dir;
        const NavState xi = sym::act(fs.X, sym::coords_inv(eps));
        const Vec3 y = xi.antenna_position(0);
        const Vec3 delta = sym::output_rho(0, sym::inverse(fs.X), Vec3::Zero()) - y;
        const Vec3 lin = eqf::build_C(fs, 0, y) * eps;
        const double err = (delta - lin).norm();
        if (prev > 0.0) CHECK(err < 0.3 * prev);
        prev = err;
      }
    }
  }

  TEST_CASE("update at the identity") {
    const eqf::FilterState fs = eqf::init(2, default_cfg(2));
    const Mat3 r = 0.01 * Mat3::Identity();
    const eqf::UpdateOutcome zero = eqf::update(fs, 0, Vec3::Zero(), r);
    CHECK(zero.status == eqf::UpdateStatus::kAccepted);
    CHECK(max_abs(zero.q.delta) == 0.0);
    CHECK(oracle::group_distance(zero.state.X, fs.X) == 0.0);

    const eqf::UpdateOutcome one = eqf::update(fs, 0, Vec3(1, 0, 0), r);
    CHECK(max_abs(one.q.delta - Vec3(-1, 0, 0)) == 0.0);
    CHECK(max_abs(one.q.N - r) == 0.0);
    CHECK_THROWS_AS(eqf::update(fs, 2, Vec3::Zero(), r), std::out_of_range);
    CHECK_THROWS_AS(eqf::update(fs, 0, Vec3::Zero(), -r), std::invalid_argument);
  }

  TEST_CASE("update contracts the covariance") {
    oracle::Rng rng(47);
    for (int k = 0; k < 50; ++k) {
      eqf::FilterState fs = eqf::init(2, default_cfg(2));
      fs.X = rng.group(2);
      fs.P = random_spd(rng, layout::dim(2));
      const eqf::UpdateOutcome out =
          eqf::update(fs, k % 2, rng.vec<3>(3.0), rng.uniform(0.01, 1.0) * Mat3::Identity());
      REQUIRE(out.status == eqf::UpdateStatus::kAccepted);
      CHECK(out.state.P.trace() <= fs.P.trace());
      CHECK(min_eig(out.state.P) > 1e-12);
      CHECK(max_abs(out.state.P - out.state.P.transpose()) == 0.0);
    }
  }

  TEST_CASE("repeated updates shrink the residual") {
    oracle::Rng rng(48);
    for (int k = 0; k < 20; ++k) {
      const NavState truth = rng.state(2, 1.0);
      eqf::FilterState fs = eqf::init(2, default_cfg(2));
      const Vec3 y = truth.antenna_position(0);
      double prev = std::numeric_limits<double>::infinity();
      for (int j = 0; j < 10; ++j) {
        const eqf::UpdateOutcome out = eqf::update(fs, 0, y, 1e-4 * Mat3::Identity());
        CHECK(out.q.delta.norm() <= prev + 1e-12);
        prev = out.q.delta.norm();
        fs = out.state;
      }
      CHECK((eqf::state_estimate(fs).antenna_position(0) - y).norm() < 0.05 * y.norm() + 1e-3);
    }
  }

  TEST_CASE("ill-conditioned and gated updates are rejected") {
    eqf::Options opts;
    opts.max_condition = 10.0;
    eqf::FilterState fs = eqf::init(2, default_cfg(2), opts);
    Mat3 r = Mat3::Identity();
    r(0, 0) = 1e6;
    const eqf::UpdateOutcome bad = eqf::update(fs, 0, Vec3(1, 2, 3), r);
    CHECK(bad.status == eqf::UpdateStatus::kRejectedConditioning);
    CHECK_FALSE(bad.diagnostic.empty());
    CHECK(oracle::group_distance(bad.state.X, fs.X) == 0.0);
    CHECK(max_abs(bad.state.P - fs.P) == 0.0);

    fs.opts = eqf::Options{};
    fs.opts.gate = 1.0;
    const eqf::UpdateOutcome gated = eqf::update(fs, 0, Vec3(100, 0, 0), 1e-4 * Mat3::Identity());
    CHECK(gated.status == eqf::UpdateStatus::kRejectedGate);
    CHECK(oracle::group_distance(gated.state.X, fs.X) == 0.0);
  }

  TEST_CASE("covariance stays positive definite") {
    oracle::Rng rng(49);
    for (auto model : {eqf::ProcessNoiseModel::kTransported, eqf::ProcessNoiseModel::kDiagonal}) {
      eqf::Options opts;
      opts.noise_model = model;
      eqf::FilterState fs = eqf::init(2, default_cfg(2), opts);
      for (int k = 0; k < 400; ++k) {
        fs = eqf::propagate(fs, rng.input(), 0.005);
        if (k % 40 == 0) fs = eqf::update(fs, (k / 40) % 2, rng.vec<3>(2.0), 0.0025 * Mat3::Identity()).state;
        REQUIRE(min_eig(fs.P) > 1e-12);
      }
      CHECK(max_abs(fs.P - fs.P.transpose()) == 0.0);
    }
  }

  TEST_CASE("process noise") {
    oracle::Rng rng(50);
    eqf::FilterState fs = eqf::init(2, default_cfg(2));
    const MatX q_id = eqf::process_noise(fs);
    fs.opts.noise_model = eqf::ProcessNoiseModel::kDiagonal;
    const MatX q_diag = eqf::process_noise(fs);
    // At the identity the transported model reduces to the diagonal one.
    CHECK(max_abs(q_id - q_diag) < 1e-20);
    fs.opts.noise_model = eqf::ProcessNoiseModel::kTransported;
    fs.X = rng.group(2);
    const MatX q = eqf::process_noise(fs);
    CHECK(max_abs(q - q.transpose()) < 1e-18);
    CHECK(min_eig(q) > -1e-18);
    CHECK(q.trace() > 0.0);
  }

  TEST_CASE("state estimate from group slots") {
    eqf::FilterState fs = eqf::init(2, default_cfg(2));
    CHECK(oracle::state_distance(eqf::state_estimate(fs), NavState::origin(2)) == 0.0);
    fs.X.C.pos = Vec3(1, 2, 3);
    CHECK(max_abs(eqf::state_estimate(fs).p - Vec3(1, 2, 3)) == 0.0);

    oracle::Rng rng(51);
    fs.X = rng.group(2);
    const Vec3 t(0.35, 0.41, 0.0);
    fs.X.d[1] = -(fs.X.A() * t);
    CHECK(max_abs(eqf::state_estimate(fs).calib[1] - t) < 1e-15);
  }

  TEST_CASE("exact transition agrees with the first-order transition for small steps") {
    oracle::Rng rng(52);
    eqf::FilterState fs = eqf::init(2, default_cfg(2));
    fs.X = rng.group(2);
    const ImuInput u = rng.input();
    eqf::FilterState exact = fs;
    exact.opts.exact_transition = true;
    const MatX p1 = eqf::propagate(fs, u, 1e-4).P;
    const MatX p2 = eqf::propagate(exact, u, 1e-4).P;
    CHECK((p1 - p2).norm() < 1e-4 * p1.norm());
  }
}
