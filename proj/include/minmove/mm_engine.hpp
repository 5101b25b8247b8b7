#pragma once

// Minimizing Movements: incremental minimization over a partition, the discrete
// energy identity ledger, convergence ladders and energy-solution checks.

#include <cstdint>
#include <string>
#include <vector>

#include "minmove/metric_core.hpp"

namespace minmove {

struct MMConfig {
  double p = 2.0;
  Partition partition;
  double prox_tolerance = 1e-10;
  int max_inner_iterations = 500;
  std::uint64_t seed = 0;
  /// Interior De Giorgi points per interval for the slope integral; 0 disables the ledger.
  int quadrature_points = 8;

  double dual_exponent() const { return p / (p - 1.0); }
  ProxOptions prox_options() const { return {prox_tolerance, max_inner_iterations, seed}; }
  /// Throws InputError when p <= 1, tolerance <= 0 or the partition is empty.
  void validate() const;

  static MMConfig uniform(double p, double step, double horizon, double prox_tolerance = 1e-10);
};

/// The three terms of the discrete energy identity on one interval.
struct EdiEntry {
  double kinetic = 0.0;       // (1/p) tau (d(U^n, U^{n-1}) / tau)^p
  double slope_term = 0.0;    // (1/p') int |d phi|^{p'}(U_tilde)
  double energy_drop = 0.0;   // phi(U^{n-1}) - phi(U^n)
  double residual = 0.0;      // kinetic + slope_term - energy_drop
  double quadrature_error = 0.0;
};

struct DeGiorgiSamples {
  std::vector<double> offsets;  // delta in [0, tau], endpoints included
  std::vector<double> slopes;
};

struct MMRun {
  MMConfig config;
  std::vector<State> states;      // U^0 .. U^N
  std::vector<double> energies;   // phi(U^n)
  std::vector<double> slopes;     // |d phi|(U^n)
  std::vector<DeGiorgiSamples> de_giorgi;  // one per interval when the ledger is enabled
  std::vector<EdiEntry> ledger;
  std::size_t inner_iterations = 0;
  double wall_seconds = 0.0;
  bool frozen_metric = false;

  /// Node samples with energy, envelope (= energy), slope, chord speed and EDI channels.
  Trajectory trajectory(const MetricBackend& backend) const;
  InterpolantSet interpolants(const MetricBackend& backend) const;
};

/// One implicit step. Throws DomainError if phi(prev) is not finite and SolverError
/// (with the best iterate) if the inner solver fails its optimality certificate.
State mm_step(const MetricBackend& backend, const State& prev, double step, double p,
              const ProxOptions& options = {});

/// Sequential mm_step over the configured partition.
MMRun run_mm(const MetricBackend& backend, const State& u0, const MMConfig& config);

/// Signed residual of the discrete energy identity on interval `interval` (0-based,
/// i.e. [t^interval, t^{interval+1}]). Throws InputError without De Giorgi samples.
double edi_residual(const MMRun& run, std::size_t interval);

struct GmmLevel {
  double step = 0.0;            // diameter of this level's partition
  double sup_distance = 0.0;    // sup over coarse nodes of d(level, next finer level)
  double order = 0.0;           // log2 of successive sup-distance ratio (0 on the first)
};

struct GmmReport {
  bool complete = true;
  std::string failure;
  std::vector<GmmLevel> levels;       // one per completed comparison
  std::vector<double> node_times;     // nodes of the coarsest partition
  std::vector<double> envelope;       // Richardson limit of phi(U_bar) per coarse node
  std::vector<double> limit_energy;   // phi of the extrapolated limit state
  std::vector<double> envelope_gap;   // envelope - limit_energy
  double cauchy_order = 0.0;          // mean empirical order over the ladder
  std::vector<MMRun> runs;
};

/// Runs the ladder tau, tau/2, ..., tau/2^refinements (independent runs may use
/// `threads` workers; results are merged by level index).
GmmReport gmm_convergence_study(const MetricBackend& backend, const State& u0,
                                const MMConfig& base, int refinements, int threads = 1);

struct EnergySolutionReport {
  double max_defect = 0.0;           // max over s < t of the integrated inequality defect
  std::size_t worst_s = 0;
  std::size_t worst_t = 0;
  double max_pointwise_defect = 0.0; // max over intervals of the differential form
  bool certified = false;
  double tolerance = 0.0;
};

/// Integrated energy inequality along a sampled curve with slope and speed channels.
EnergySolutionReport energy_solution_check(const Trajectory& traj, double p, double tolerance);
EnergySolutionReport energy_solution_check(const MMRun& run, const MetricBackend& backend,
                                           double tolerance);

}  // namespace minmove
