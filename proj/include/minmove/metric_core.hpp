#pragma once

// Backend-agnostic vocabulary for gradient flows in metric spaces: the backend
// interface, time partitions, sampled trajectories, interpolants and the
// metric-derivative / slope / upper-gradient estimators.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "minmove/errors.hpp"

namespace minmove {

using State = Eigen::VectorXd;

/// Distances below this are treated as zero when checking metric axioms.
inline constexpr double kStateTolerance = 1e-10;

/// (lambda, p)-geodesic convexity modulus declared by a backend.
struct ConvexityCertificate {
  double lambda = 0.0;
  double p = 2.0;
};

struct ProxOptions {
  double tolerance = 1e-10;
  int max_iterations = 500;
  std::uint64_t seed = 0;
};

struct ProxResult {
  State state;
  double residual = 0.0;  // first-order optimality residual of the step functional
  int iterations = 0;
  bool converged = false;
};

/// A metric space together with an energy functional on it.
///
/// Implementations must be immutable after construction so a single instance can
/// be shared by concurrent solver runs.
class MetricBackend {
 public:
  virtual ~MetricBackend() = default;

  /// Short human-readable descriptor of the state space.
  virtual std::string describe() const = 0;
  virtual std::size_t dimension() const = 0;

  virtual double distance(const State& u, const State& v) const = 0;
  /// phi(u); may be +infinity outside the effective domain.
  virtual double energy(const State& u) const = 0;
  /// Local slope |d phi|(u) from the backend's exact formula.
  virtual double slope(const State& u) const = 0;

  /// Minimizes d^p(v, prev) / (p step^(p-1)) + phi(v).
  virtual ProxResult prox(const State& prev, double step, double p,
                          const ProxOptions& options) const = 0;

  // Frozen-coefficient metrics measure a step with a norm anchored at the step's
  // starting point. Plain metric backends ignore the anchor.
  virtual double step_distance(const State& /*anchor*/, const State& u, const State& v) const {
    return distance(u, v);
  }
  virtual double step_slope(const State& /*anchor*/, const State& u) const { return slope(u); }
  virtual bool frozen_metric() const { return false; }

  virtual std::optional<ConvexityCertificate> convexity() const { return std::nullopt; }
  virtual std::optional<State> exact_minimizer() const { return std::nullopt; }

  /// A state at distance approximately `radius` from u in a random direction.
  virtual State perturb(const State& u, double radius, std::mt19937_64& rng) const = 0;

  /// Maps an arbitrary vector back into the state space (identity for linear spaces).
  virtual State project(const State& u) const { return u; }

  /// Number of coordinates used to parametrize bounded-set samples.
  virtual std::size_t sample_dimension() const { return dimension(); }
  /// Embeds unit-cube coordinates in [-1,1]^k into the ball of `radius` around center.
  virtual State embed_sample(const State& center, double radius,
                             std::span<const double> unit_coords) const = 0;

  /// Drives the slope below `tolerance` starting from `seed`; nullopt on failure.
  virtual std::optional<State> critical_point(const State& seed, double tolerance,
                                              int max_iterations) const = 0;
};

/// Time grid tau = (tau^1, tau^2, ...) with nodes t^0 < t^1 < ...
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<double> steps, double origin = 0.0);

  /// Uniform steps of size `step` covering [origin, origin + horizon]; the last
  /// step is shortened when horizon is not a multiple of step.
  static Partition uniform(double step, double horizon, double origin = 0.0);

  std::span<const double> steps() const { return steps_; }
  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t size() const { return steps_.size(); }
  double step(std::size_t k) const { return steps_[k]; }
  double origin() const { return nodes_.front(); }
  double end() const { return nodes_.back(); }
  double diameter() const;

  /// Index k such that t lies in the closed-open interval [t^k, t^{k+1}).
  /// Throws DomainError outside [t^0, t^N].
  std::size_t interval_of(double t) const;

  /// Every step halved.
  Partition refined() const;
  /// Steps of this partition followed by those of `tail`, nodes continuing from end().
  Partition concatenated(const Partition& tail) const;
  /// Steps [first, first + count) as a partition starting at node `first`.
  Partition slice(std::size_t first, std::size_t count) const;

 private:
  std::vector<double> steps_;
  std::vector<double> nodes_{0.0};
};

/// A sampled curve with per-sample channels. Optional channels may be empty.
///
/// speeds[k] (k >= 1) is the chord speed d(u_{k-1}, u_k) / (t_k - t_{k-1}) on the
/// interval ending at sample k; speeds[0] repeats speeds[1].
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<double> energies;
  std::vector<double> envelope;
  std::vector<double> slopes;
  std::vector<double> speeds;
  std::vector<double> edi_residuals;

  std::size_t size() const { return times.size(); }
  /// Checks sample alignment and strictly increasing times; throws InputError.
  void validate() const;
};

/// Fills energies, speeds and (if empty) envelope from the states.
void fill_channels(const MetricBackend& backend, Trajectory& traj, bool with_slopes = true);

struct MetricDerivativeEstimate {
  double value = 0.0;           // Richardson-extrapolated symmetric quotient
  double finest_quotient = 0.0;
  std::vector<std::pair<double, double>> quotients;  // (h, quotient), finest first
};

MetricDerivativeEstimate metric_derivative_estimate(const MetricBackend& backend,
                                                    const Trajectory& traj, double t);

struct SlopeCurvePoint {
  double radius = 0.0;
  double sup_quotient = 0.0;  // sup over samples drawn at this radius
  double running_sup = 0.0;   // sup over this and all finer radii (monotone in radius)
};

struct LocalSlopeEstimate {
  double value = 0.0;  // finest-radius value
  std::vector<SlopeCurvePoint> curve;
};

/// Geometric radius schedule r0 * 2^-k, k = 0 .. levels-1.
std::vector<double> geometric_radii(double r0 = 0.1, int levels = 13);

LocalSlopeEstimate local_slope_sampled(const MetricBackend& backend, const State& u,
                                       std::span<const double> radii, int samples_per_radius,
                                       std::uint64_t seed);

struct UpperGradientReport {
  double residual = 0.0;          // max over sample pairs of |dphi| - int g |u'|
  double quadrature_error = 0.0;  // trapezoid error estimate of the integral
  std::size_t worst_s = 0;
  std::size_t worst_t = 0;
};

/// Tests the strong upper gradient inequality of `g` along a sampled trajectory.
UpperGradientReport upper_gradient_residual(const MetricBackend& backend, const Trajectory& traj,
                                            std::span<const double> g);

/// Piecewise constant and De Giorgi variational interpolants of node values.
class InterpolantSet {
 public:
  InterpolantSet(const MetricBackend& backend, std::vector<State> values, Partition partition,
                 double p, ProxOptions options);

  /// U_bar(t) = U^k for t in (t^{k-1}, t^k]; U^0 at t^0.
  const State& left_constant(double t) const;
  /// U_under(t) = U^{k-1} for t in [t^{k-1}, t^k); U^N at t^N.
  const State& right_constant(double t) const;
  /// U_tilde(t^{k-1} + delta): prox of U^{k-1} with partial step delta; U^k at nodes.
  State de_giorgi(double t) const;

  const Partition& partition() const { return partition_; }
  const std::vector<State>& values() const { return values_; }

 private:
  const MetricBackend* backend_;
  std::vector<State> values_;
  Partition partition_;
  double p_;
  ProxOptions options_;
  std::size_t node_index(double t, double* offset) const;
};

InterpolantSet build_interpolants(const MetricBackend& backend, std::vector<State> values,
                                  const Partition& partition, double p,
                                  const ProxOptions& options = {});

}  // namespace minmove
