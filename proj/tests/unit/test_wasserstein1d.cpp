#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "minmove/mm_engine.hpp"
#include "minmove/wasserstein1d.hpp"

using namespace minmove;
using namespace minmove::w1d;

namespace {

// Standard normal quantile by Newton on Phi(x) = erfc(-x / sqrt 2) / 2.
double reference_quantile(double theta) {
  double x = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double F = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    const double f = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double dx = (F - theta) / f;
    x -= std::clamp(dx, -1.0, 1.0);
    if (std::abs(dx) < 1e-15) break;
  }
  return x;
}

EnergySpec fokker_planck() {
  EnergySpec s;
  s.c1 = 1.0;
  s.c2 = 1.0;
  return s;
}

EnergySpec heat() {
  EnergySpec s;
  s.c1 = 0.0;
  s.c2 = 1.0;
  return s;
}

}  // namespace

TEST_CASE("normal quantile agrees with an erfc inversion") {
  for (double th : {1e-6, 0.001, 0.025, 0.3, 0.5, 0.77, 0.999})
    CHECK(normal_quantile(th) == doctest::Approx(reference_quantile(th)).epsilon(1e-12));
  // 1 - 1e-7 is itself only known to ~1e-16, which moves the quantile by ~2e-10
  CHECK(normal_quantile(1 - 1e-7) == doctest::Approx(reference_quantile(1 - 1e-7)).epsilon(1e-9));
}

TEST_CASE("gaussian quantile measures use midpoint levels") {
  const auto lv = QuantileMeasure::levels(4);
  REQUIRE(lv.size() == 4);
  CHECK(lv[0] == doctest::Approx(0.125));
  CHECK(lv[3] == doctest::Approx(0.875));
  const auto g = QuantileMeasure::gaussian(4, 1.0, 2.0);
  for (int i = 0; i < 4; ++i) CHECK(g.q[i] == doctest::Approx(1.0 + 2.0 * reference_quantile(lv[i])));
}

TEST_CASE("W_p of shifted measures is the shift") {
  const auto a = QuantileMeasure::gaussian(512, 0.0, 1.0);
  for (double m : {0.1, 0.5, 3.0}) {
    const auto b = QuantileMeasure::gaussian(512, m, 1.0);
    CHECK(std::abs(wp_distance(a, b) - m) < 1e-3);
  }
  const auto p = QuantileMeasure::point_mass(8, 0.0, 3.0);
  const auto q = QuantileMeasure::uniform(8, -1.0, 1.0, 3.0);
  double s = 0.0;
  for (int i = 0; i < 8; ++i) s += std::pow(std::abs(q.q[i]), 3.0) / 8;
  CHECK(wp_distance(p, q) == doctest::Approx(std::cbrt(s)));
}

TEST_CASE("W_2 metric axioms on random monotone vectors") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> N(0.0, 1.0);
  auto draw = [&] {
    Eigen::VectorXd q(32);
    for (int i = 0; i < 32; ++i) q[i] = N(rng);
    std::sort(q.begin(), q.end());
    return q;
  };
  for (int k = 0; k < 500; ++k) {
    const auto a = draw(), b = draw(), c = draw();
    const double ab = wp_distance(a, b, 2.0), bc = wp_distance(b, c, 2.0), ac = wp_distance(a, c, 2.0);
    CHECK(ab == wp_distance(b, a, 2.0));
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(wp_distance(a, a, 2.0) == 0.0);
  }
}

TEST_CASE("quantile validation") {
  QuantileMeasure m;
  m.q = Eigen::VectorXd(3);
  m.q << 0.0, -1.0, 1.0;
  CHECK_THROWS_AS(m.validate(), InvariantError);
  m.q = Eigen::VectorXd(0);
  CHECK_THROWS_AS(m.validate(), InputError);
}

TEST_CASE("entropy of the standard gaussian converges to -(1/2) log(2 pi e)") {
  const double exact = -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double e512 = std::abs(energy_eval(heat(), QuantileMeasure::gaussian(512, 0, 1)) - exact);
  const double e1024 = std::abs(energy_eval(heat(), QuantileMeasure::gaussian(1024, 0, 1)) - exact);
  CHECK(e1024 < e512);
  CHECK(e1024 < 1e-2);
}

TEST_CASE("energy is infinite on a point mass once entropy is on") {
  CHECK(std::isinf(energy_eval(heat(), QuantileMeasure::point_mass(16, 0.0))));
  EnergySpec pot;
  pot.c2 = 0.0;
  CHECK(energy_eval(pot, QuantileMeasure::point_mass(16, 2.0)) == doctest::Approx(2.0));
}

TEST_CASE("velocity field is N times the gradient of the discrete energy") {
  EnergySpec s = fokker_planck();
  s.c3 = 0.5;
  s.W.kind = Interaction::Kind::power;
  s.W.exponent = 2.0;
  s.V.kind = Potential::Kind::double_well;
  const auto mu = QuantileMeasure::gaussian(24, 0.3, 0.8);
  const auto f = velocity_field(s, mu).field;
  for (int i = 0; i < 24; ++i) {
    auto a = mu, b = mu;
    a.q[i] += 1e-7;
    b.q[i] -= 1e-7;
    const double fd = 24.0 * (energy_eval(s, a) - energy_eval(s, b)) / 2e-7;
    CHECK(f[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("potential-only JKO step is the per-particle resolvent") {
  EnergySpec s;
  s.c2 = 0.0;
  const auto mu = QuantileMeasure::gaussian(64, 1.0, 1.0);
  const auto r = jko_step(s, mu, 0.1);
  REQUIRE(r.converged);
  CHECK((r.state - mu.q / 1.1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("JKO steps keep the quantiles monotone") {
  EnergySpec s = fokker_planck();
  s.V.kind = Potential::Kind::double_well;
  auto mu = QuantileMeasure::gaussian(128, 0.0, 2.0);
  for (int k = 0; k < 5; ++k) {
    const auto r = jko_step(s, mu, 0.05);
    REQUIRE(r.converged);
    mu.q = r.state;
    CHECK_NOTHROW(mu.validate());
  }
}

TEST_CASE("heat flow spreads the variance at rate 2") {
  const Wasserstein1DBackend b(heat(), 256);
  MMConfig cfg = MMConfig::uniform(2.0, 1e-3, 0.1, 1e-8);
  cfg.quadrature_points = 0;
  const MMRun run = run_mm(b, QuantileMeasure::gaussian(256, 0, 1).q, cfg);
  const double v0 = b.measure(run.states.front()).variance();
  const double v1 = b.measure(run.states.back()).variance();
  CHECK((v1 - v0) / 0.1 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(v1 == doctest::Approx(1.2).epsilon(0.05));
}

TEST_CASE("gibbs quantiles of V = x^2/2 are the standard normal quantiles") {
  const auto g = gibbs_stationary(fokker_planck(), 512);
  const auto lv = QuantileMeasure::levels(512);
  double worst = 0.0;
  for (int i = 0; i < 512; ++i) worst = std::max(worst, std::abs(g.q[i] - reference_quantile(lv[i])));
  CHECK(worst < 1e-6);
  CHECK(wasserstein_slope(fokker_planck(), g) <= 5e-2);
}

TEST_CASE("gibbs measure of a shifted, stiffer potential") {
  EnergySpec s = fokker_planck();
  s.V.strength = 4.0;
  s.V.center = 1.0;
  s.c2 = 2.0;
  // density exp(-2 (x-1)^2 / 2) = N(1, 1/2)
  const auto g = gibbs_stationary(s, 64);
  const auto lv = QuantileMeasure::levels(64);
  for (int i = 0; i < 64; ++i) CHECK(g.q[i] == doctest::Approx(1.0 + std::sqrt(0.5) * reference_quantile(lv[i])).epsilon(1e-9));
}

TEST_CASE("gibbs_stationary refuses a non-integrable density") {
  EnergySpec s = fokker_planck();
  s.V.strength = -1.0;
  CHECK_THROWS_AS(gibbs_stationary(s, 32), DomainError);
}

TEST_CASE("weak PDE residual is first order in tau") {
  auto residual = [](double tau) {
    const Wasserstein1DBackend b(heat(), 128);
    MMConfig cfg = MMConfig::uniform(2.0, tau, 0.02, 1e-10);
    cfg.quadrature_points = 0;
    const MMRun run = run_mm(b, QuantileMeasure::gaussian(128, 0, 1).q, cfg);
    std::vector<QuantileMeasure> states;
    for (const auto& q : run.states) states.push_back(b.measure(q));
    return pde_residual(b.spec(), run.config.partition.nodes(), states, 2.0).max_residual;
  };
  const double r1 = residual(2e-3), r2 = residual(1e-3);
  CHECK(r1 / r2 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("energy spec validation") {
  EnergySpec s;
  s.c1 = 0.0;
  s.c2 = 0.0;
  CHECK_THROWS_AS(s.validate(), InputError);
  s.c1 = -1.0;
  s.c2 = 1.0;
  CHECK_THROWS_AS(s.validate(), InputError);
}
