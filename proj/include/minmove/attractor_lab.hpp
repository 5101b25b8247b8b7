#pragma once

// Semiflow laboratory: set evolution, omega-limits, rest points, attractor
// approximation, Lyapunov monotonicity and exponential decay fits.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minmove/mm_engine.hpp"

namespace minmove {

/// A state lifted to the phase space together with its energy value.
struct PhasePoint {
  State u;
  double phi = 0.0;
};

PhasePoint lift(const MetricBackend& backend, const State& u);
/// d(u_x, u_y) + |phi_x - phi_y|.
double phase_distance(const MetricBackend& backend, const PhasePoint& x, const PhasePoint& y);
/// Hausdorff excess e(A, B) = sup_{a in A} inf_{b in B} d_phi(a, b); 0 for empty A.
double hausdorff_excess(const MetricBackend& backend, const std::vector<PhasePoint>& a,
                        const std::vector<PhasePoint>& b);

struct EnsembleState {
  std::vector<PhasePoint> points;
  std::string origin;
  double time = 0.0;
  std::vector<std::string> errors;  // per point; empty when the point evolved cleanly
};

struct BoundedSetSpec {
  State center;
  double radius = 1.0;
  std::size_t count = 64;
  std::uint64_t seed = 0;
};

/// Low-discrepancy sample of the ball of `radius` around `center`.
EnsembleState sample_bounded_set(const MetricBackend& backend, const BoundedSetSpec& spec);

/// Evolves every point along `steps` (a partition starting at 0). Failed points keep
/// their last state and record the error; the rest are evolved normally.
EnsembleState evolve_set(const MetricBackend& backend, const EnsembleState& ens,
                         const Partition& steps, const MMConfig& cfg, int threads = 1);
/// Uniform steps of size cfg.partition.step(0) over [0, t]; t = 0 is the identity.
EnsembleState evolve_set(const MetricBackend& backend, const EnsembleState& ens, double t,
                         const MMConfig& cfg, int threads = 1);

struct OmegaCluster {
  PhasePoint representative;
  std::size_t members = 0;
  double slope = 0.0;
};

struct OmegaReport {
  std::vector<OmegaCluster> clusters;
  std::vector<double> times;
  std::vector<double> drifts;  // max d_phi between consecutive snapshots (one per snapshot after the first)
  bool settled = false;
  double max_slope = 0.0;
  EnsembleState final_state;
};

/// Evolves ens0 to each time of t_grid (increasing, spanning a decade) and clusters
/// the final snapshot greedily in index order. Settled when the last three drifts
/// (or all, if fewer) lie below cluster_radius.
OmegaReport omega_limit_estimate(const MetricBackend& backend, const EnsembleState& ens0,
                                 const std::vector<double>& t_grid, double cluster_radius,
                                 const MMConfig& cfg, int threads = 1);

struct RestPointReport {
  std::vector<PhasePoint> points;  // sorted by first coordinate
  std::vector<double> slopes;
  std::vector<std::size_t> dropped;  // seed indices that did not converge
  double diameter = 0.0;
  bool bounded = true;
};

RestPointReport rest_points_solve(const MetricBackend& backend, const std::vector<State>& seeds,
                                  double tolerance, int max_iterations = 200,
                                  double dedup_radius = 1e-6);

struct AttractorReport {
  std::vector<PhasePoint> attractor;  // omega-limit cluster representatives
  std::vector<double> cluster_slopes;
  std::vector<double> times;
  std::vector<double> excess;  // e_phi(T(t) B, A)
  bool monotone = false;
  bool attracted = false;      // final excess <= radius
  double invariance_excess = 0.0;
  bool quasi_invariant = false;
  bool settled = false;
  RestPointReport rest_points;
  std::size_t failed_points = 0;
};

struct AttractorOptions {
  std::size_t snapshots = 50;
  double rest_tolerance = 1e-8;
  int threads = 1;
};

AttractorReport attractor_approximate(const MetricBackend& backend, const BoundedSetSpec& set,
                                      const MMConfig& cfg, double horizon, double radius,
                                      const AttractorOptions& options = {});

struct LyapunovVerdict {
  bool monotone = true;
  double max_increase = 0.0;
  bool near_stationary = false;
  double window_variation = 0.0;
  double kinetic_integral = 0.0;
  double kinetic_bound = 0.0;  // p * eps
  bool kinetic_ok = true;
  bool passed = true;
};

/// Envelope monotonicity (with `slack`) on the whole trajectory; on [t_begin, t_end],
/// if the envelope varies less than eps, checks int |u'|^p <= p eps.
LyapunovVerdict lyapunov_check(const Trajectory& traj, double t_begin, double t_end, double eps,
                               double p, double slack);

struct DecayReport {
  double fitted_rate = 0.0;
  double target_rate = 0.0;  // lambda p'
  double lambda = 0.0;
  bool rate_ok = false;
  bool distance_bound_ok = true;
  double worst_distance_margin = 0.0;  // min of gap - (lambda/p) d^p
  std::size_t fit_points = 0;
  std::optional<double> truncated_at;
  bool skipped = false;
};

/// Least-squares slope of log(phi(u(t)) - phi(u_bar)) on [t0, T]. Throws DomainError
/// unless the backend certifies lambda > 0.
DecayReport decay_fit(const Trajectory& traj, const MetricBackend& backend, double t0, double p,
                      double tolerance = 0.03);

}  // namespace minmove
