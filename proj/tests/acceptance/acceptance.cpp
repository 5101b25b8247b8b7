// Acceptance suite: one PASS/FAIL line per criterion. `--only N` runs a single one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "commands.hpp"
#include "minmove/attractor_lab.hpp"
#include "minmove/banach.hpp"
#include "minmove/mm_engine.hpp"
#include "minmove/wasserstein1d.hpp"

using namespace minmove;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// Standard normal quantile by bisection on erfc; independent of the library.
double normal_quantile_oracle(double theta) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (0.5 * std::erfc(-m / std::numbers::sqrt2) < theta ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

BanachBackend quadratic_backend(std::size_t n, double p = 2.0) {
  return BanachBackend(PNormSpace::euclidean(n, p), BanachFunctional::quadratic(n, 1.0));
}

MMConfig plain(double tau, double horizon, double tol = 1e-10) {
  MMConfig cfg = MMConfig::uniform(2.0, tau, horizon, tol);
  cfg.quadrature_points = 0;
  return cfg;
}

// 1. mm_step within 10 eps_prox of u/(1+tau) on 1000 random pairs, under 1 s.
Verdict criterion1() {
  const auto b = quadratic_backend(3);
  const ProxOptions opts{1e-10, 500, 0};
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(-5.0, 5.0), T(1e-3, 1.0);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int k = 0; k < 1000; ++k) {
    const State u = State::NullaryExpr(3, [&](Eigen::Index) { return U(rng); });
    const double tau = T(rng);
    const State v = mm_step(b, u, tau, 2.0, opts);
    worst = std::max(worst, b.distance(v, u / (1.0 + tau)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 10 * opts.tolerance && secs < 1.0,
          "max error " + fmt(worst) + " (bound " + fmt(10 * opts.tolerance) + "), " + fmt(secs) + " s"};
}

// 2. sup error against u0 e^{-t} on [0,5] over tau = 1e-1..1e-4, order 1 +- 0.15 per decade.
Verdict criterion2() {
  const auto b = quadratic_backend(1);
  std::vector<double> errors;
  for (double tau : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const MMRun run = run_mm(b, State::Constant(1, 1.0), plain(tau, 5.0));
    double sup = 0.0;
    const auto& nodes = run.config.partition.nodes();
    for (std::size_t k = 0; k < run.states.size(); ++k)
      sup = std::max(sup, std::abs(run.states[k][0] - std::exp(-nodes[k])));
    errors.push_back(sup);
  }
  bool ok = true;
  std::string orders;
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double order = std::log10(errors[k - 1] / errors[k]);
    ok = ok && std::abs(order - 1.0) <= 0.15;
    orders += (k > 1 ? ", " : "") + fmt(order);
  }
  return {ok, "orders per decade [" + orders + "], finest error " + fmt(errors.back())};
}

// 3. per-interval EDI residual <= 1e-6 with 32 De Giorgi points; 64 points shrink it >= 3x.
Verdict criterion3() {
  const auto b = quadratic_backend(1);
  auto worst_residual = [&](int m) {
    MMConfig cfg = MMConfig::uniform(2.0, 0.1, 5.0);
    cfg.quadrature_points = m;
    const MMRun run = run_mm(b, State::Constant(1, 1.0), cfg);
    double w = 0.0;
    for (std::size_t k = 0; k < run.ledger.size(); ++k) w = std::max(w, std::abs(edi_residual(run, k)));
    return w;
  };
  const double r32 = worst_residual(32), r64 = worst_residual(64);
  return {r32 <= 1e-6 && r32 / r64 >= 3.0,
          "max |residual| " + fmt(r32) + " at 32 points, " + fmt(r64) + " at 64 (ratio " + fmt(r32 / r64) + ")"};
}

// 4. key estimate for the lambda = 1 quadratic at p in {2, 3/2, 4}.
Verdict criterion4() {
  bool ok = true;
  std::string detail;
  for (double p : {2.0, 1.5, 4.0}) {
    const PNormSpace sp = PNormSpace::euclidean(3, p);
    const auto rep = key_estimate_check(BanachFunctional::quadratic(3, 1.0), sp, 1000, 77);
    bool leg = rep.lower_violations == 0 && rep.upper_violations == 0;
    if (p == 2.0) leg = leg && rep.max_lower_gap <= 1e-10 && rep.max_upper_gap <= 1e-10;
    ok = ok && leg;
    detail += (detail.empty() ? "" : "; ") + std::string("p=") + fmt(p) + ": " +
              std::to_string(rep.lower_violations) + "/" + std::to_string(rep.upper_violations) +
              " violations";
    if (p == 2.0) detail += ", gaps " + fmt(rep.max_lower_gap) + "/" + fmt(rep.max_upper_gap);
  }
  return {ok, detail};
}

// 5. fitted energy-decay rate in [1.94, 2.06], under 10 s.
Verdict criterion5() {
  const auto b = quadratic_backend(1);
  const auto t0 = Clock::now();
  const MMRun run = run_mm(b, State::Constant(1, 1.0), plain(1e-3, 10.0));
  const auto rep = decay_fit(run.trajectory(b), b, 0.0, 2.0);
  const double secs = seconds_since(t0);
  return {rep.fitted_rate >= 1.94 && rep.fitted_rate <= 2.06 && secs < 10.0,
          "fitted rate " + fmt(rep.fitted_rate) + " (target 2), " + fmt(secs) + " s"};
}

// 6. W_2 of shifted gaussians at N = 512, metric axioms on 1e4 triples.
Verdict criterion6() {
  const auto base = w1d::QuantileMeasure::gaussian(512, 0.0, 1.0);
  double shift_err = 0.0;
  for (double m : {0.25, 1.0, 2.5, -3.0})
    shift_err = std::max(shift_err, std::abs(w1d::wp_distance(base, w1d::QuantileMeasure::gaussian(512, m, 1.0)) - std::abs(m)));

  std::mt19937_64 rng(6);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> S(0.2, 3.0);
  auto draw = [&] {
    Eigen::VectorXd q(64);
    const double scale = S(rng), shift = N(rng);
    for (int i = 0; i < 64; ++i) q[i] = shift + scale * N(rng);
    std::sort(q.begin(), q.end());
    return q;
  };
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const auto a = draw(), b = draw(), c = draw();
    const double ab = w1d::wp_distance(a, b, 2.0), ba = w1d::wp_distance(b, a, 2.0);
    const double bc = w1d::wp_distance(b, c, 2.0), ac = w1d::wp_distance(a, c, 2.0);
    worst = std::max({worst, std::abs(ab - ba), ac - ab - bc, w1d::wp_distance(a, a, 2.0)});
    if (!(ab > 0.0)) worst = std::max(worst, 1.0);
  }
  return {shift_err <= 1e-3 && worst <= 1e-12,
          "shift error " + fmt(shift_err) + ", worst axiom defect " + fmt(worst)};
}

// 7. heat flow variance 1 + 2t within 5% at t = 0.1; weak PDE residual first order in tau.
Verdict criterion7() {
  w1d::EnergySpec heat;
  heat.c1 = 0.0;
  heat.c2 = 1.0;
  const w1d::Wasserstein1DBackend b(heat, 256);
  const auto mu0 = w1d::QuantileMeasure::gaussian(256, 0.0, 1.0);
  const MMRun run = run_mm(b, mu0.q, plain(1e-3, 0.1, 1e-8));
  const double var = b.measure(run.states.back()).variance();
  const double rel = std::abs(var - 1.2) / 1.2;

  std::vector<double> res;
  for (double tau : {1e-3, 5e-4, 2.5e-4}) {
    const MMRun r = run_mm(b, mu0.q, plain(tau, 0.02, 1e-10));
    std::vector<w1d::QuantileMeasure> states;
    for (const auto& q : r.states) states.push_back(b.measure(q));
    res.push_back(w1d::pde_residual(heat, r.config.partition.nodes(), states, 2.0).max_residual);
  }
  bool first_order = true;
  std::string orders;
  for (std::size_t k = 1; k < res.size(); ++k) {
    const double order = std::log2(res[k - 1] / res[k]);
    first_order = first_order && std::abs(order - 1.0) <= 0.15;
    orders += (k > 1 ? ", " : "") + fmt(order);
  }
  return {rel <= 0.05 && first_order && run.states.size() == 101,
          "variance " + fmt(var) + " (expected 1.2, rel " + fmt(rel) + "), PDE residual orders [" + orders + "]"};
}

// 8. Gibbs quantiles vs gaussian to 1e-6 at N = 512; slope <= 5e-2 and halving from 256 to 512.
Verdict criterion8() {
  w1d::EnergySpec fp;
  fp.c1 = 1.0;
  fp.c2 = 1.0;
  const auto g512 = w1d::gibbs_stationary(fp, 512);
  const auto lv = w1d::QuantileMeasure::levels(512);
  double qerr = 0.0;
  for (int i = 0; i < 512; ++i) qerr = std::max(qerr, std::abs(g512.q[i] - normal_quantile_oracle(lv[i])));
  const double s512 = w1d::wasserstein_slope(fp, g512);
  const double s256 = w1d::wasserstein_slope(fp, w1d::gibbs_stationary(fp, 256));
  return {qerr <= 1e-6 && s512 <= 5e-2 && s256 / s512 >= 2.0,
          "quantile error " + fmt(qerr) + ", slope " + fmt(s256) + " (N=256) -> " + fmt(s512) +
              " (N=512), ratio " + fmt(s256 / s512) + " (needs >= 2)"};
}

// 9. double-well attractor study.
Verdict criterion9() {
  const BanachBackend b(PNormSpace::euclidean(1), BanachFunctional::double_well(1));
  const auto t0 = Clock::now();
  AttractorOptions opts;
  opts.rest_tolerance = 1e-8;
  opts.threads = 1;
  const auto rep = attractor_approximate(b, {State::Zero(1), 2.0, 64, 9}, plain(1e-2, 50.0), 50.0, 1e-2, opts);
  const double secs = seconds_since(t0);

  bool located = true;
  for (double root : {-1.0, 0.0, 1.0}) {
    bool found = false;
    for (std::size_t i = 0; i < rep.rest_points.points.size(); ++i)
      found = found || (std::abs(rep.rest_points.points[i].u[0] - root) <= 1e-6 && rep.rest_points.slopes[i] <= 1e-6);
    located = located && found;
  }
  double max_cluster_slope = 0.0;
  for (double s : rep.cluster_slopes) max_cluster_slope = std::max(max_cluster_slope, s);
  const double final_excess = rep.excess.back();
  return {located && final_excess < 1e-2 && max_cluster_slope <= 1e-5 && secs < 60.0,
          std::to_string(rep.rest_points.points.size()) + " rest points (roots located: " +
              (located ? "yes" : "no") + "), final excess " + fmt(final_excess) + ", max cluster slope " +
              fmt(max_cluster_slope) + ", " + fmt(secs) + " s"};
}

std::vector<std::string> shipped_scenarios() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(MINMOVE_SCENARIO_DIR))
    if (e.path().extension() == ".json") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

// 10. concatenation and translation, exact on 100 random split points; Lyapunov on every scenario.
Verdict criterion10() {
  const BanachBackend dw(PNormSpace::euclidean(2), BanachFunctional::double_well(2));
  w1d::EnergySpec fp;
  fp.c2 = 0.5;
  const w1d::Wasserstein1DBackend wb(fp, 32);
  State u_dw(2);
  u_dw << 1.7, -0.3;
  const State u_w = w1d::QuantileMeasure::gaussian(32, 1.0, 2.0).q;

  std::mt19937_64 rng(10);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool banach = trial % 2 == 0;
    const MetricBackend& b = banach ? static_cast<const MetricBackend&>(dw) : wb;
    const State& u0 = banach ? u_dw : u_w;
    std::uniform_real_distribution<double> T(0.01, 0.05);
    std::vector<double> steps(40);
    for (auto& s : steps) s = T(rng);
    MMConfig cfg = plain(0.01, 1.0, banach ? 1e-10 : 1e-8);
    cfg.partition = Partition(steps);
    const MMRun full = run_mm(b, u0, cfg);

    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, steps.size() - 1)(rng);
    // concatenation: run [0, t_k], then restart from its end on the remaining steps
    MMConfig head = cfg, tail = cfg;
    head.partition = cfg.partition.slice(0, k);
    tail.partition = cfg.partition.slice(k, steps.size() - k);
    const MMRun a = run_mm(b, u0, head);
    const MMRun c = run_mm(b, a.states.back(), tail);
    for (std::size_t i = 0; i <= k; ++i) mismatches += (a.states[i] != full.states[i]);
    for (std::size_t i = 0; i < c.states.size(); ++i) mismatches += (c.states[i] != full.states[k + i]);
    // translation: the solution started at u(t_k) on a prefix of the remaining steps
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, steps.size() - k)(rng);
    MMConfig shifted = cfg;
    shifted.partition = Partition(std::vector<double>(steps.begin() + k, steps.begin() + k + m));
    const MMRun s = run_mm(b, full.states[k], shifted);
    for (std::size_t i = 0; i < s.states.size(); ++i) mismatches += (s.states[i] != full.states[k + i]);
  }

  std::size_t lyapunov_failures = 0;
  double worst_increase = 0.0;
  std::string failing;
  for (const auto& path : shipped_scenarios()) {
    const auto sc = cli::load_scenario(path);
    MMConfig cfg = sc.flow;
    cfg.quadrature_points = 0;
    const MMRun run = run_mm(*sc.backend, sc.initial, cfg);
    const Trajectory t = run.trajectory(*sc.backend);
    const auto v = lyapunov_check(t, 0.0, t.times.back(), 0.0, cfg.p, cfg.prox_tolerance);
    worst_increase = std::max(worst_increase, v.max_increase);
    if (!v.monotone) {
      ++lyapunov_failures;
      failing += " " + std::filesystem::path(path).filename().string();
    }
  }
  return {mismatches == 0 && lyapunov_failures == 0,
          std::to_string(mismatches) + " state mismatches over 100 splits; Lyapunov failures " +
              std::to_string(lyapunov_failures) + failing + " (max increase " + fmt(worst_increase) + ")"};
}

// 11. byte-identical artifacts across repeated runs and thread counts.
Verdict criterion11() {
  std::size_t differing = 0, files = 0;
  std::string which;
  for (const auto& path : shipped_scenarios()) {
    const auto sc = cli::load_scenario(path);
    const std::string cmd = sc.experiment;
    const auto a = cli::execute(cmd, sc, {1, true});
    const auto b = cli::execute(cmd, cli::load_scenario(path), {1, true});
    const auto c = cli::execute(cmd, sc, {4, true});
    files += a.files.size();
    if (a.files != b.files || a.files != c.files || a.exit_code != b.exit_code || a.exit_code != c.exit_code) {
      ++differing;
      which += " " + std::filesystem::path(path).filename().string();
    }
  }
  return {differing == 0 && files > 0,
          std::to_string(files) + " artifacts compared, " + std::to_string(differing) + " scenarios differ" + which};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10, criterion11};
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "--only expects 1..%zu\n", criteria.size());
    return 2;
  }
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<int>(k + 1) != only) continue;
    Verdict v;
    try {
      v = criteria[k]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %zu: %s\n", v.pass ? "PASS" : "FAIL", k + 1, v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
