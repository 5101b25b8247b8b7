#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "minmove/banach.hpp"
#include "minmove/metric_core.hpp"
#include "minmove/numerics.hpp"

using namespace minmove;

namespace {

BanachBackend quadratic_1d(double lambda = 1.0) {
  return BanachBackend(PNormSpace::euclidean(1), BanachFunctional::quadratic(1, lambda));
}

State s1(double x) { return State::Constant(1, x); }

}  // namespace

TEST_CASE("uniform partition shortens the last step") {
  const Partition p = Partition::uniform(0.3, 1.0);
  REQUIRE(p.size() == 4);
  CHECK(p.step(3) == doctest::Approx(0.1));
  CHECK(p.end() == doctest::Approx(1.0));
  CHECK(p.diameter() == doctest::Approx(0.3));
}

TEST_CASE("partition refinement, slicing and concatenation") {
  const Partition p({0.1, 0.2, 0.3});
  const Partition r = p.refined();
  REQUIRE(r.size() == 6);
  CHECK(r.step(5) == doctest::Approx(0.15));
  CHECK(r.end() == doctest::Approx(p.end()));

  const Partition head = p.slice(0, 1);
  const Partition tail = p.slice(1, 2);
  CHECK(tail.origin() == doctest::Approx(0.1));
  const Partition joined = head.concatenated(Partition({0.2, 0.3}));
  REQUIRE(joined.nodes().size() == p.nodes().size());
  for (std::size_t k = 0; k < p.nodes().size(); ++k) CHECK(joined.nodes()[k] == p.nodes()[k]);

  CHECK(p.interval_of(0.0) == 0);
  CHECK(p.interval_of(0.15) == 1);
  CHECK_THROWS_AS(p.interval_of(0.7), DomainError);
  CHECK_THROWS_AS(p.interval_of(-0.1), DomainError);
}

TEST_CASE("trajectory validation rejects duplicate times and misaligned channels") {
  Trajectory t;
  t.times = {0.0, 0.1, 0.1};
  t.states = {s1(0), s1(0), s1(0)};
  CHECK_THROWS_AS(t.validate(), InputError);
  t.times = {0.0, 0.1, 0.2};
  t.energies = {1.0};
  CHECK_THROWS_AS(t.validate(), InputError);
  t.energies.clear();
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("fill_channels computes chord speeds") {
  const auto b = quadratic_1d();
  Trajectory t;
  t.times = {0.0, 0.5, 1.0};
  t.states = {s1(0.0), s1(1.0), s1(1.5)};
  fill_channels(b, t);
  CHECK(t.speeds[1] == doctest::Approx(2.0));
  CHECK(t.speeds[2] == doctest::Approx(1.0));
  CHECK(t.speeds[0] == t.speeds[1]);
  CHECK(t.energies[1] == doctest::Approx(0.5));
}

TEST_CASE("metric derivative of a linear curve is its speed") {
  const auto b = quadratic_1d();
  Trajectory t;
  for (int k = 0; k <= 64; ++k) {
    t.times.push_back(k / 64.0);
    t.states.push_back(s1(3.0 * k / 64.0));
  }
  const auto est = metric_derivative_estimate(b, t, 0.5);
  CHECK(est.value == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("sampled local slope matches |u| for the quadratic") {
  const auto b = quadratic_1d();
  const auto radii = geometric_radii(0.1, 13);
  REQUIRE(radii.size() == 13);
  CHECK(radii.back() == doctest::Approx(0.1 / 4096));
  const auto est = local_slope_sampled(b, s1(3.0), radii, 32, 11);
  CHECK(est.value == doctest::Approx(3.0).epsilon(1e-3));
  for (std::size_t k = 1; k < est.curve.size(); ++k)
    CHECK(est.curve[k].running_sup <= est.curve[k - 1].running_sup + 1e-15);

  const std::vector<double> tiny{1e-9};
  CHECK_THROWS_AS(local_slope_sampled(b, s1(3.0), tiny, 4, 1), InputError);
}

TEST_CASE("energy is an upper gradient along an exact quadratic flow") {
  const auto b = quadratic_1d();
  Trajectory t;
  std::vector<double> g;
  for (int k = 0; k <= 400; ++k) {
    const double time = k * 0.01;
    t.times.push_back(time);
    t.states.push_back(s1(std::exp(-time)));
    g.push_back(std::exp(-time));
  }
  fill_channels(b, t);
  const auto rep = upper_gradient_residual(b, t, g);
  CHECK(rep.residual <= 1e-4);
}

TEST_CASE("interpolants follow their definitions") {
  const auto b = quadratic_1d();
  const Partition part({0.5, 0.5});
  const std::vector<State> values{s1(1.0), s1(1.0 / 1.5), s1(1.0 / 2.25)};
  const auto in = build_interpolants(b, values, part, 2.0);
  CHECK(in.left_constant(0.0)[0] == doctest::Approx(1.0));
  CHECK(in.left_constant(0.25)[0] == doctest::Approx(1.0 / 1.5));
  CHECK(in.right_constant(0.25)[0] == doctest::Approx(1.0));
  CHECK(in.right_constant(1.0)[0] == doctest::Approx(1.0 / 2.25));
  // partial step delta = 0.2 from U^0: closed form U^0 / (1 + delta)
  CHECK(in.de_giorgi(0.2)[0] == doctest::Approx(1.0 / 1.2).epsilon(1e-9));
  CHECK(in.de_giorgi(0.5)[0] == doctest::Approx(1.0 / 1.5));
}

TEST_CASE("numerics: isotonic projection pools adjacent violators") {
  Eigen::VectorXd x(4);
  x << 3.0, 1.0, 2.0, 5.0;
  const auto y = numerics::isotonic_projection(x);
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(2.0));
  CHECK(y[2] == doctest::Approx(2.0));
  CHECK(y[3] == doctest::Approx(5.0));
}

TEST_CASE("numerics: tridiagonal solve agrees with a dense LU") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int n = 12;
  Eigen::VectorXd d(n), off(n - 1), rhs(n);
  for (int i = 0; i < n; ++i) d[i] = 4.0 + U(rng);
  for (int i = 0; i < n - 1; ++i) off[i] = U(rng);
  for (int i = 0; i < n; ++i) rhs[i] = U(rng);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) A(i, i) = d[i];
  for (int i = 0; i < n - 1; ++i) A(i, i + 1) = A(i + 1, i) = off[i];
  const Eigen::VectorXd ref = A.partialPivLu().solve(rhs);
  const Eigen::VectorXd x = numerics::solve_tridiagonal(d, off, rhs);
  CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("numerics: quadrature, regression and low-discrepancy points") {
  std::vector<double> x, y;
  for (int k = 0; k <= 1000; ++k) {
    x.push_back(k / 1000.0);
    y.push_back(x.back() * x.back());
  }
  CHECK(numerics::trapezoid(x, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  const std::vector<double> xs{0, 1, 2, 3}, ys{1, 3, 5, 7};
  CHECK(numerics::least_squares_slope(xs, ys) == doctest::Approx(2.0));

  const auto a = numerics::kronecker_points(32, 2, 9);
  const auto b = numerics::kronecker_points(32, 2, 9);
  REQUIRE(a.size() == 32);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    for (double c : a[i]) CHECK((c >= 0.0 && c < 1.0));
  }
  CHECK(numerics::dual_exponent(3.0) == doctest::Approx(1.5));
}
