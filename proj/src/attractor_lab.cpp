#include "minmove/attractor_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minmove/numerics.hpp"
#include "minmove/parallel.hpp"

namespace minmove {

PhasePoint lift(const MetricBackend& backend, const State& u) { return {u, backend.energy(u)}; }

double phase_distance(const MetricBackend& backend, const PhasePoint& x, const PhasePoint& y) {
  return backend.distance(x.u, y.u) + std::abs(x.phi - y.phi);
}

double hausdorff_excess(const MetricBackend& backend, const std::vector<PhasePoint>& a,
                        const std::vector<PhasePoint>& b) {
  if (a.empty()) return 0.0;
  if (b.empty()) return std::numeric_limits<double>::infinity();
  double sup = 0.0;
  for (const auto& x : a) {
    double inf = std::numeric_limits<double>::infinity();
    for (const auto& y : b) inf = std::min(inf, phase_distance(backend, x, y));
    sup = std::max(sup, inf);
  }
  return sup;
}

EnsembleState sample_bounded_set(const MetricBackend& backend, const BoundedSetSpec& spec) {
  if (spec.count == 0) throw InputError("bounded set sample needs at least one point");
  if (!(spec.radius >= 0.0)) throw InputError("bounded set radius must be >= 0");
  const auto pts = numerics::kronecker_points(spec.count, backend.sample_dimension(), spec.seed);
  EnsembleState ens;
  ens.origin = "ball(radius=" + std::to_string(spec.radius) + ", count=" + std::to_string(spec.count) + ")";
  ens.points.reserve(spec.count);
  std::vector<double> coords(backend.sample_dimension());
  for (const auto& p : pts) {
    for (std::size_t j = 0; j < coords.size(); ++j) coords[j] = 2.0 * p[j] - 1.0;
    ens.points.push_back(lift(backend, backend.embed_sample(spec.center, spec.radius, coords)));
  }
  ens.errors.assign(ens.points.size(), std::string());
  return ens;
}

EnsembleState evolve_set(const MetricBackend& backend, const EnsembleState& ens,
                         const Partition& steps, const MMConfig& cfg, int threads) {
  MMConfig c = cfg;
  c.partition = steps;
  c.quadrature_points = 0;
  EnsembleState out;
  out.origin = ens.origin;
  out.time = ens.time + (steps.end() - steps.origin());
  out.points.resize(ens.points.size());
  out.errors = ens.errors;
  out.errors.resize(ens.points.size());
  parallel_for(ens.points.size(), threads, [&](std::size_t i) {
    try {
      const MMRun run = run_mm(backend, ens.points[i].u, c);
      out.points[i] = {run.states.back(), run.energies.back()};
    } catch (const std::exception& e) {
      out.points[i] = ens.points[i];
      out.errors[i] = e.what();
    }
  });
  return out;
}

EnsembleState evolve_set(const MetricBackend& backend, const EnsembleState& ens, double t,
                         const MMConfig& cfg, int threads) {
  if (t < 0.0) throw InputError("evolve_set: duration must be >= 0");
  if (t == 0.0) return ens;
  return evolve_set(backend, ens, Partition::uniform(cfg.partition.step(0), t), cfg, threads);
}

namespace {

double max_drift(const MetricBackend& backend, const EnsembleState& a, const EnsembleState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i)
    d = std::max(d, phase_distance(backend, a.points[i], b.points[i]));
  return d;
}

std::vector<OmegaCluster> cluster(const MetricBackend& backend, const std::vector<PhasePoint>& pts,
                                  double radius) {
  std::vector<OmegaCluster> out;
  for (const auto& p : pts) {
    bool placed = false;
    for (auto& c : out) {
      if (phase_distance(backend, c.representative, p) <= radius) {
        ++c.members;
        placed = true;
        break;
      }
    }
    if (!placed) out.push_back({p, 1, backend.slope(p.u)});
  }
  return out;
}

// Steps of size tau covering [0, t], rounded to a whole number of steps (at least one).
Partition whole_steps(double tau, double t) {
  const auto m = static_cast<std::size_t>(std::max(1.0, std::round(t / tau)));
  return Partition(std::vector<double>(m, tau));
}

}  // namespace

OmegaReport omega_limit_estimate(const MetricBackend& backend, const EnsembleState& ens0,
                                 const std::vector<double>& t_grid, double cluster_radius,
                                 const MMConfig& cfg, int threads) {
  if (t_grid.size() < 2) throw InputError("omega_limit_estimate: t_grid needs at least two times");
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
    if (!(t_grid[k + 1] > t_grid[k])) throw InputError("omega_limit_estimate: t_grid must increase");
  if (!(t_grid.front() > ens0.time) || !(t_grid.back() >= 10.0 * t_grid.front()))
    throw InputError("omega_limit_estimate: t_grid must start after t0 and span a decade");
  if (!(cluster_radius > 0.0)) throw InputError("cluster radius must be positive");

  OmegaReport rep;
  EnsembleState cur = ens0;
  std::optional<EnsembleState> prev;
  for (double t : t_grid) {
    EnsembleState next = evolve_set(backend, cur, t - cur.time, cfg, threads);
    if (prev) rep.drifts.push_back(max_drift(backend, *prev, next));
    rep.times.push_back(next.time);
    prev = next;
    cur = std::move(next);
  }
  const std::size_t need = std::min<std::size_t>(3, rep.drifts.size());
  rep.settled = need > 0;
  for (std::size_t k = rep.drifts.size() - need; k < rep.drifts.size(); ++k)
    rep.settled = rep.settled && rep.drifts[k] < cluster_radius;
  rep.clusters = cluster(backend, cur.points, cluster_radius);
  for (const auto& c : rep.clusters) rep.max_slope = std::max(rep.max_slope, c.slope);
  rep.final_state = std::move(cur);
  return rep;
}

RestPointReport rest_points_solve(const MetricBackend& backend, const std::vector<State>& seeds,
                                  double tolerance, int max_iterations, double dedup_radius) {
  if (seeds.empty()) throw InputError("rest_points_solve: no seeds");
  RestPointReport rep;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto u = backend.critical_point(seeds[i], tolerance, max_iterations);
    if (!u) {
      rep.dropped.push_back(i);
      continue;
    }
    const PhasePoint pp = lift(backend, *u);
    const bool dup = std::any_of(rep.points.begin(), rep.points.end(), [&](const PhasePoint& q) {
      return phase_distance(backend, pp, q) <= dedup_radius;
    });
    if (!dup) rep.points.push_back(pp);
  }
  std::stable_sort(rep.points.begin(), rep.points.end(),
                   [](const PhasePoint& a, const PhasePoint& b) { return a.u[0] < b.u[0]; });
  for (const auto& p : rep.points) rep.slopes.push_back(backend.slope(p.u));
  for (std::size_t i = 0; i < rep.points.size(); ++i)
    for (std::size_t j = i + 1; j < rep.points.size(); ++j)
      rep.diameter = std::max(rep.diameter, phase_distance(backend, rep.points[i], rep.points[j]));
  rep.bounded = std::isfinite(rep.diameter);
  return rep;
}

AttractorReport attractor_approximate(const MetricBackend& backend, const BoundedSetSpec& set,
                                      const MMConfig& cfg, double horizon, double radius,
                                      const AttractorOptions& options) {
  if (!(horizon > 0.0)) throw InputError("attractor study needs horizon > 0");
  if (options.snapshots < 1) throw InputError("attractor study needs at least one snapshot");
  const double tau = cfg.partition.step(0);
  const EnsembleState b0 = sample_bounded_set(backend, set);

  std::vector<double> decades;
  for (double f : {1e-3, 1e-2, 1e-1, 1.0}) {
    const double t = tau * std::max(1.0, std::round(f * horizon / tau));
    if (decades.empty() || t > decades.back()) decades.push_back(t);
  }
  AttractorReport rep;
  const OmegaReport omega = omega_limit_estimate(backend, b0, decades, radius, cfg, options.threads);
  rep.settled = omega.settled;
  for (const auto& c : omega.clusters) {
    rep.attractor.push_back(c.representative);
    rep.cluster_slopes.push_back(c.slope);
  }

  const auto total = static_cast<std::size_t>(std::max(1.0, std::round(horizon / tau)));
  EnsembleState cur = b0;
  rep.times.push_back(0.0);
  rep.excess.push_back(hausdorff_excess(backend, cur.points, rep.attractor));
  std::size_t done = 0;
  for (std::size_t k = 1; k <= options.snapshots; ++k) {
    const std::size_t target = total * k / options.snapshots;
    if (target <= done) continue;
    cur = evolve_set(backend, cur, Partition(std::vector<double>(target - done, tau)), cfg,
                     options.threads);
    done = target;
    rep.times.push_back(tau * static_cast<double>(done));
    rep.excess.push_back(hausdorff_excess(backend, cur.points, rep.attractor));
  }
  for (const auto& e : cur.errors)
    if (!e.empty()) ++rep.failed_points;
  rep.monotone = true;
  for (std::size_t k = 1; k < rep.excess.size(); ++k)
    if (rep.excess[k] > rep.excess[k - 1] + cfg.prox_tolerance) rep.monotone = false;
  rep.attracted = rep.excess.back() <= radius;

  EnsembleState a0;
  a0.points = rep.attractor;
  a0.errors.assign(a0.points.size(), std::string());
  const EnsembleState a1 = evolve_set(backend, a0, whole_steps(tau, 0.1 * horizon), cfg, options.threads);
  rep.invariance_excess = hausdorff_excess(backend, a1.points, rep.attractor);
  rep.quasi_invariant = rep.invariance_excess <= radius;

  std::vector<State> seeds;
  for (const auto& p : b0.points) seeds.push_back(p.u);
  rep.rest_points = rest_points_solve(backend, seeds, options.rest_tolerance);
  return rep;
}

LyapunovVerdict lyapunov_check(const Trajectory& traj, double t_begin, double t_end, double eps,
                               double p, double slack) {
  traj.validate();
  const std::vector<double>& env = !traj.envelope.empty() ? traj.envelope : traj.energies;
  if (env.empty()) throw InputError("lyapunov_check: energy envelope channel is required");
  LyapunovVerdict v;
  for (std::size_t k = 1; k < env.size(); ++k) {
    const double inc = env[k] - env[k - 1];
    v.max_increase = std::max(v.max_increase, inc);
    if (inc > slack) v.monotone = false;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t count = 0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.times[k] < t_begin || traj.times[k] > t_end) continue;
    lo = std::min(lo, env[k]);
    hi = std::max(hi, env[k]);
    ++count;
  }
  v.window_variation = count > 0 ? hi - lo : 0.0;
  v.kinetic_bound = p * eps;
  if (count > 0 && v.window_variation < eps) {
    v.near_stationary = true;
    if (traj.speeds.empty()) throw InputError("lyapunov_check: speed channel is required");
    for (std::size_t k = 1; k < traj.size(); ++k) {
      if (traj.times[k - 1] < t_begin || traj.times[k] > t_end) continue;
      v.kinetic_integral += (traj.times[k] - traj.times[k - 1]) * std::pow(traj.speeds[k], p);
    }
    v.kinetic_ok = v.kinetic_integral <= v.kinetic_bound;
  }
  v.passed = v.monotone && v.kinetic_ok;
  return v;
}

DecayReport decay_fit(const Trajectory& traj, const MetricBackend& backend, double t0, double p,
                      double tolerance) {
  traj.validate();
  const auto cert = backend.convexity();
  if (!cert || !(cert->lambda > 0.0))
    throw DomainError("decay_fit requires a convexity certificate with lambda > 0");
  auto ubar = backend.exact_minimizer();
  if (!ubar && !traj.states.empty()) ubar = backend.critical_point(traj.states.back(), 1e-10, 200);
  if (!ubar) throw DomainError("decay_fit: the minimizer is neither known nor solvable");
  const double phi_bar = backend.energy(*ubar);

  DecayReport rep;
  rep.lambda = cert->lambda;
  rep.target_rate = cert->lambda * numerics::dual_exponent(p);
  std::vector<double> ts, logs;
  rep.worst_distance_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.times[k] < t0) continue;
    const double phi = traj.energies.empty() ? backend.energy(traj.states[k]) : traj.energies[k];
    const double gap = phi - phi_bar;
    const double d = backend.distance(traj.states[k], *ubar);
    const double margin = gap - cert->lambda / p * std::pow(d, p);
    rep.worst_distance_margin = std::min(rep.worst_distance_margin, margin);
    if (margin < -1e-12 * (1.0 + std::abs(gap))) rep.distance_bound_ok = false;
    if (rep.truncated_at) continue;
    if (gap <= 1e-14) {
      rep.truncated_at = traj.times[k];
      continue;
    }
    ts.push_back(traj.times[k]);
    logs.push_back(std::log(gap));
  }
  if (!std::isfinite(rep.worst_distance_margin)) rep.worst_distance_margin = 0.0;
  rep.fit_points = ts.size();
  if (ts.size() < 2) {
    rep.skipped = true;
    rep.rate_ok = true;
    return rep;
  }
  rep.fitted_rate = -numerics::least_squares_slope(ts, logs);
  rep.rate_ok = rep.fitted_rate >= rep.target_rate * (1.0 - tolerance);
  return rep;
}

}  // namespace minmove
