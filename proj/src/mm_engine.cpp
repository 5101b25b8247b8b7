#include "minmove/mm_engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "minmove/numerics.hpp"
#include "minmove/parallel.hpp"

namespace minmove {

void MMConfig::validate() const {
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("flow exponent p must lie in (1, inf)");
  if (!(prox_tolerance > 0.0)) throw InputError("prox tolerance must be positive");
  if (max_inner_iterations < 1) throw InputError("max inner iterations must be >= 1");
  if (partition.size() == 0) throw InputError("partition has no steps");
  if (quadrature_points < 0) throw InputError("quadrature points must be >= 0");
}

MMConfig MMConfig::uniform(double p, double step, double horizon, double prox_tolerance) {
  MMConfig c;
  c.p = p;
  c.partition = Partition::uniform(step, horizon);
  c.prox_tolerance = prox_tolerance;
  return c;
}

namespace {

double movement(double d, double step, double p) { return std::pow(d, p) / (p * std::pow(step, p - 1.0)); }

ProxResult checked_prox(const MetricBackend& backend, const State& prev, double phi_prev,
                        double step, double p, const ProxOptions& options) {
  ProxResult r = backend.prox(prev, step, p, options);
  if (!r.converged) {
    throw SolverError("minimizing movement step: inner solver hit its iteration cap", r.state,
                      r.residual);
  }
  const double value = movement(backend.step_distance(prev, prev, r.state), step, p) +
                       backend.energy(r.state);
  if (!(value <= phi_prev + options.tolerance * (1.0 + std::abs(phi_prev)))) {
    throw SolverError("minimizing movement step: result worse than staying put", r.state,
                      r.residual);
  }
  return r;
}

}  // namespace

State mm_step(const MetricBackend& backend, const State& prev, double step, double p,
              const ProxOptions& options) {
  const double phi_prev = backend.energy(prev);
  if (!std::isfinite(phi_prev)) throw DomainError("mm_step: phi(u_prev) is not finite");
  if (!(step > 0.0)) throw DomainError("mm_step: step must be positive");
  return checked_prox(backend, prev, phi_prev, step, p, options).state;
}

MMRun run_mm(const MetricBackend& backend, const State& u0, const MMConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const double phi0 = backend.energy(u0);
  if (!std::isfinite(phi0)) throw DomainError("run_mm: initial datum outside the domain of phi");

  const Partition& part = config.partition;
  const std::size_t n = part.size();
  const double p = config.p;
  const double pd = config.dual_exponent();
  const ProxOptions opts = config.prox_options();

  MMRun run;
  run.config = config;
  run.frozen_metric = backend.frozen_metric();
  run.states.reserve(n + 1);
  run.energies.reserve(n + 1);
  run.slopes.reserve(n + 1);
  run.states.push_back(u0);
  run.energies.push_back(phi0);
  run.slopes.push_back(backend.slope(u0));

  const int m = config.quadrature_points;
  for (std::size_t k = 0; k < n; ++k) {
    const State& prev = run.states.back();
    const double phi_prev = run.energies.back();
    const double tau = part.step(k);
    ProxResult r;
    try {
      r = checked_prox(backend, prev, phi_prev, tau, p, opts);
    } catch (const SolverError& e) {
      throw e.with_node(k + 1);
    }
    run.inner_iterations += static_cast<std::size_t>(r.iterations);
    const double phi = backend.energy(r.state);
    if (std::isnan(phi) || phi == -std::numeric_limits<double>::infinity()) {
      throw InvariantError("run_mm: phi is not bounded below along the scheme (node " +
                           std::to_string(k + 1) + ")");
    }

    if (m > 0) {
      DeGiorgiSamples dg;
      dg.offsets.resize(static_cast<std::size_t>(m) + 2);
      dg.slopes.resize(static_cast<std::size_t>(m) + 2);
      for (int j = 0; j <= m + 1; ++j) {
        const double delta = tau * static_cast<double>(j) / static_cast<double>(m + 1);
        dg.offsets[static_cast<std::size_t>(j)] = delta;
        double g = 0.0;
        if (j == 0) {
          g = backend.step_slope(prev, prev);
        } else if (j == m + 1) {
          g = backend.step_slope(prev, r.state);
        } else {
          const ProxResult rd = backend.prox(prev, delta, p, opts);
          if (!rd.converged) {
            throw SolverError("De Giorgi interpolant: inner solver hit its iteration cap", rd.state,
                              rd.residual)
                .with_partial_step(delta, k + 1);
          }
          run.inner_iterations += static_cast<std::size_t>(rd.iterations);
          g = backend.step_slope(prev, rd.state);
        }
        dg.slopes[static_cast<std::size_t>(j)] = g;
      }
      std::vector<double> integrand(dg.slopes.size());
      for (std::size_t j = 0; j < integrand.size(); ++j) integrand[j] = std::pow(dg.slopes[j], pd);

      EdiEntry e;
      const double d = backend.step_distance(prev, prev, r.state);
      e.kinetic = tau * std::pow(d / tau, p) / p;
      e.slope_term = numerics::trapezoid(dg.offsets, integrand) / pd;
      e.energy_drop = phi_prev - phi;
      e.residual = e.kinetic + e.slope_term - e.energy_drop;
      if ((m + 1) % 2 == 0) {
        std::vector<double> xc, yc;
        for (std::size_t j = 0; j < integrand.size(); j += 2) {
          xc.push_back(dg.offsets[j]);
          yc.push_back(integrand[j]);
        }
        e.quadrature_error = std::abs(e.slope_term - numerics::trapezoid(xc, yc) / pd) / 3.0;
      }
      run.ledger.push_back(e);
      run.de_giorgi.push_back(std::move(dg));
    }

    run.states.push_back(std::move(r.state));
    run.energies.push_back(phi);
    run.slopes.push_back(backend.slope(run.states.back()));
  }
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

Trajectory MMRun::trajectory(const MetricBackend& backend) const {
  Trajectory t;
  t.times = config.partition.nodes();
  t.states = states;
  t.energies = energies;
  t.envelope = energies;
  t.slopes = slopes;
  const std::size_t n = states.size();
  t.speeds.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double tau = config.partition.step(k - 1);
    t.speeds[k] = backend.step_distance(states[k - 1], states[k - 1], states[k]) / tau;
  }
  if (n > 1) t.speeds[0] = t.speeds[1];
  if (!ledger.empty()) {
    t.edi_residuals.assign(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) t.edi_residuals[k] = ledger[k - 1].residual;
  }
  return t;
}

InterpolantSet MMRun::interpolants(const MetricBackend& backend) const {
  return InterpolantSet(backend, states, config.partition, config.p, config.prox_options());
}

double edi_residual(const MMRun& run, std::size_t interval) {
  if (run.ledger.empty()) throw InputError("edi_residual: run has no De Giorgi evaluations");
  if (interval >= run.ledger.size()) throw InputError("edi_residual: interval index out of range");
  return run.ledger[interval].residual;
}

GmmReport gmm_convergence_study(const MetricBackend& backend, const State& u0,
                                const MMConfig& base, int refinements, int threads) {
  if (refinements < 2) throw InputError("gmm_convergence_study: refinements must be >= 2");
  base.validate();
  const auto levels = static_cast<std::size_t>(refinements) + 1;
  std::vector<MMConfig> configs(levels, base);
  for (std::size_t j = 1; j < levels; ++j) configs[j].partition = configs[j - 1].partition.refined();
  for (auto& c : configs) c.quadrature_points = 0;

  std::vector<std::optional<MMRun>> runs(levels);
  std::vector<std::string> errors(levels);
  parallel_for(levels, threads, [&](std::size_t j) {
    try {
      runs[j] = run_mm(backend, u0, configs[j]);
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });

  GmmReport rep;
  std::size_t done = 0;
  while (done < levels && runs[done]) ++done;
  if (done < levels) {
    rep.complete = false;
    rep.failure = "level " + std::to_string(done) + ": " + errors[done];
  }
  rep.node_times = base.partition.nodes();
  const std::size_t coarse_nodes = rep.node_times.size();
  for (std::size_t j = 0; j + 1 < done; ++j) {
    const std::size_t stride = std::size_t{1} << j;
    double sup = 0.0;
    for (std::size_t i = 0; i < coarse_nodes; ++i) {
      sup = std::max(sup, backend.distance(runs[j]->states[i * stride],
                                           runs[j + 1]->states[2 * i * stride]));
    }
    GmmLevel lvl;
    lvl.step = configs[j].partition.diameter();
    lvl.sup_distance = sup;
    if (!rep.levels.empty() && sup > 0.0 && rep.levels.back().sup_distance > 0.0) {
      lvl.order = std::log2(rep.levels.back().sup_distance / sup);
    }
    rep.levels.push_back(lvl);
  }
  std::vector<double> sups;
  for (const auto& l : rep.levels) sups.push_back(l.sup_distance);
  rep.cauchy_order = numerics::mean_log2_ratio(sups);

  if (done >= 2) {
    const MMRun& fine = *runs[done - 1];
    const MMRun& coarse = *runs[done - 2];
    const std::size_t sf = std::size_t{1} << (done - 1);
    const std::size_t sc = std::size_t{1} << (done - 2);
    for (std::size_t i = 0; i < coarse_nodes; ++i) {
      const double ef = fine.energies[i * sf];
      const double ec = coarse.energies[i * sc];
      const double env = 2.0 * ef - ec;
      const State lim = backend.project(2.0 * fine.states[i * sf] - coarse.states[i * sc]);
      const double el = backend.energy(lim);
      rep.envelope.push_back(env);
      rep.limit_energy.push_back(el);
      rep.envelope_gap.push_back(env - el);
    }
  }
  for (std::size_t j = 0; j < done; ++j) rep.runs.push_back(std::move(*runs[j]));
  return rep;
}

EnergySolutionReport energy_solution_check(const Trajectory& traj, double p, double tolerance) {
  traj.validate();
  const std::size_t n = traj.size();
  if (traj.energies.empty() || traj.slopes.empty() || traj.speeds.empty())
    throw InputError("energy_solution_check: energy, slope and speed channels are required");
  const double pd = p / (p - 1.0);

  EnergySolutionReport rep;
  rep.tolerance = tolerance;
  rep.max_defect = -std::numeric_limits<double>::infinity();
  rep.max_pointwise_defect = -std::numeric_limits<double>::infinity();
  double cum = 0.0;
  double min_a = traj.energies[0];
  std::size_t arg_min = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const double dt = traj.times[k] - traj.times[k - 1];
    const double kinetic = dt * std::pow(traj.speeds[k], p) / p;
    const double slope =
        dt * 0.5 * (std::pow(traj.slopes[k - 1], pd) + std::pow(traj.slopes[k], pd)) / pd;
    cum += kinetic + slope;
    const double pointwise = (traj.energies[k] - traj.energies[k - 1] + kinetic + slope) / dt;
    rep.max_pointwise_defect = std::max(rep.max_pointwise_defect, pointwise);
    const double a = cum + traj.energies[k];
    if (a - min_a > rep.max_defect) {
      rep.max_defect = a - min_a;
      rep.worst_s = arg_min;
      rep.worst_t = k;
    }
    if (a < min_a) {
      min_a = a;
      arg_min = k;
    }
  }
  if (n < 2) {
    rep.max_defect = 0.0;
    rep.max_pointwise_defect = 0.0;
  }
  rep.certified = rep.max_defect <= tolerance;
  return rep;
}

EnergySolutionReport energy_solution_check(const MMRun& run, const MetricBackend& backend,
                                           double tolerance) {
  return energy_solution_check(run.trajectory(backend), run.config.p, tolerance);
}

}  // namespace minmove
