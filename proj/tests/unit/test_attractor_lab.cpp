#include <doctest.h>

#include <cmath>

#include "minmove/attractor_lab.hpp"
#include "minmove/banach.hpp"

using namespace minmove;

namespace {

PhasePoint pp(const MetricBackend& b, double x) { return lift(b, State::Constant(1, x)); }

MMConfig config(double tau, double horizon) {
  MMConfig cfg = MMConfig::uniform(2.0, tau, horizon);
  cfg.quadrature_points = 0;
  return cfg;
}

}  // namespace

TEST_CASE("hausdorff excess is one-sided") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, 0.0));
  const std::vector<PhasePoint> zero{pp(b, 0.0)}, both{pp(b, 0.0), pp(b, 1.0)};
  CHECK(hausdorff_excess(b, zero, both) == 0.0);
  CHECK(hausdorff_excess(b, both, zero) == doctest::Approx(1.0));
  CHECK(hausdorff_excess(b, {}, zero) == 0.0);
}

TEST_CASE("phase distance adds the energy gap") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, 1.0));
  CHECK(phase_distance(b, pp(b, 1.0), pp(b, 3.0)) == doctest::Approx(2.0 + 4.0));
}

TEST_CASE("set evolution is a semigroup with matched steps") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::double_well(1));
  BoundedSetSpec spec{State::Zero(1), 2.0, 16, 4};
  const EnsembleState e0 = sample_bounded_set(b, spec);
  REQUIRE(e0.points.size() == 16);
  for (const auto& p : e0.points) CHECK(std::abs(p.u[0]) <= 2.0);

  const MMConfig cfg = config(0.05, 1.0);
  const auto whole = evolve_set(b, e0, Partition(std::vector<double>(30, 0.05)), cfg);
  const auto first = evolve_set(b, e0, Partition(std::vector<double>(12, 0.05)), cfg);
  const auto second = evolve_set(b, first, Partition(std::vector<double>(18, 0.05)), cfg);
  for (std::size_t i = 0; i < whole.points.size(); ++i) CHECK(whole.points[i].u[0] == second.points[i].u[0]);

  const auto par = evolve_set(b, e0, Partition(std::vector<double>(30, 0.05)), cfg, 4);
  for (std::size_t i = 0; i < whole.points.size(); ++i) CHECK(whole.points[i].u[0] == par.points[i].u[0]);
  CHECK(evolve_set(b, e0, 0.0, cfg).points[3].u[0] == e0.points[3].u[0]);
}

TEST_CASE("rest points of the double well are the roots of u^3 - u") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::double_well(1));
  std::vector<State> seeds;
  for (double x : {-1.8, -0.7, -0.1, 0.05, 0.6, 1.9}) seeds.push_back(State::Constant(1, x));
  const auto rep = rest_points_solve(b, seeds, 1e-10);
  REQUIRE(rep.points.size() == 3);
  const double roots[] = {-1.0, 0.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    CHECK(rep.points[i].u[0] == doctest::Approx(roots[i]).epsilon(1e-8));
    CHECK(rep.slopes[i] <= 1e-9);
  }
  CHECK(rep.bounded);
  // farthest pair is the two wells: distance 2, equal energies
  CHECK(rep.diameter == doctest::Approx(2.0).epsilon(1e-6));

  // rest points are invariant under the flow
  const MMConfig cfg = config(0.01, 1.0);
  for (const auto& p : rep.points) {
    const MMRun run = run_mm(b, p.u, cfg);
    CHECK(phase_distance(b, lift(b, run.states.back()), p) <= 10 * cfg.prox_tolerance);
  }
}

TEST_CASE("omega limits of the double well sit on the wells") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::double_well(1));
  const EnsembleState e0 = sample_bounded_set(b, {State::Zero(1), 2.0, 16, 2});
  const auto rep = omega_limit_estimate(b, e0, {0.3, 3.0, 30.0}, 1e-2, config(0.01, 30.0));
  CHECK(rep.clusters.size() >= 2);
  CHECK(rep.max_slope <= 1e-5);
  CHECK_THROWS_AS(omega_limit_estimate(b, e0, {1.0, 2.0}, 1e-2, config(0.01, 2.0)), InputError);
}

TEST_CASE("attractor of the quadratic is the origin and excess decays like e^{-t}") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, 1.0));
  AttractorOptions opts;
  opts.snapshots = 10;
  const auto rep = attractor_approximate(b, {State::Zero(1), 1.0, 8, 0}, config(1e-3, 20.0), 20.0, 1e-2, opts);
  REQUIRE(rep.attractor.size() == 1);
  CHECK(std::abs(rep.attractor[0].u[0]) < 1e-6);
  CHECK(rep.monotone);
  CHECK(rep.attracted);
  // d + |phi| for the farthest point u(t) = e^{-t}: e^{-t} + e^{-2t}/2
  const double t = rep.times[1];
  CHECK(rep.excess[1] == doctest::Approx(std::exp(-t) + 0.5 * std::exp(-2 * t)).epsilon(1e-2));
}

TEST_CASE("a set inside the attractor has zero excess") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, 1.0));
  AttractorOptions opts;
  opts.snapshots = 5;
  const auto rep = attractor_approximate(b, {State::Zero(1), 0.0, 4, 0}, config(0.01, 1.0), 1.0, 1e-2, opts);
  for (double e : rep.excess) CHECK(e <= 1e-12);
  CHECK(rep.quasi_invariant);
}

TEST_CASE("lyapunov check") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, 1.0));
  const MMRun run = run_mm(b, State::Constant(1, 1e-4), config(0.01, 2.0));
  const Trajectory t = run.trajectory(b);
  const double eps = 1e-6;
  const auto v = lyapunov_check(t, 0.0, 2.0, eps, 2.0, 1e-10);
  CHECK(v.passed);
  CHECK(v.near_stationary);
  // direct integral of |u'|^2 for the discrete solution, bounded by 2 eps
  double kin = 0.0;
  for (std::size_t k = 1; k < run.states.size(); ++k)
    kin += std::pow(std::abs(run.states[k][0] - run.states[k - 1][0]) / 0.01, 2) * 0.01;
  CHECK(v.kinetic_integral == doctest::Approx(kin));
  CHECK(kin <= 2 * eps);

  Trajectory up;
  up.times = {0.0, 1.0, 2.0};
  up.states = {State::Constant(1, 0.0), State::Constant(1, 1.0), State::Constant(1, 2.0)};
  fill_channels(b, up);
  CHECK_FALSE(lyapunov_check(up, 0.0, 2.0, 1e-6, 2.0, 1e-10).passed);
}

TEST_CASE("decay fit recovers lambda p' for the quadratic") {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, 1.0));
  const MMRun run = run_mm(b, State::Constant(1, 1.0), config(1e-3, 5.0));
  const auto rep = decay_fit(run.trajectory(b), b, 0.0, 2.0);
  CHECK(rep.target_rate == doctest::Approx(2.0));
  CHECK(rep.fitted_rate == doctest::Approx(2.0).epsilon(0.03));
  CHECK(rep.rate_ok);
  CHECK(rep.distance_bound_ok);

  const MMRun still = run_mm(b, State::Zero(1), config(1e-2, 1.0));
  CHECK(decay_fit(still.trajectory(b), b, 0.0, 2.0).skipped);

  const BanachBackend dw(PNormSpace::euclidean(1), BanachFunctional::double_well(1));
  const MMRun r2 = run_mm(dw, State::Constant(1, 0.5), config(1e-2, 1.0));
  CHECK_THROWS_AS(decay_fit(r2.trajectory(dw), dw, 0.0, 2.0), DomainError);
}
