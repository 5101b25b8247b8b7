#pragma once

// Finite-dimensional Banach backend: R^n with weighted q-norms, the p-duality map,
// a family of smooth functionals (quadratic, power, double-well, 1D Allen-Cahn) and
// an optional frozen-coefficient Finsler mode.

#include <cstdint>
#include <optional>
#include <string>

#include "minmove/metric_core.hpp"

namespace minmove {

/// ||v||_u = (sum_i w_i(u) h |v_i|^q)^(1/q). The reference norm has w = 1.
struct PNormSpace {
  std::size_t n = 1;
  double q_norm = 2.0;
  double p = 2.0;
  double cell_volume = 1.0;
  /// Finsler mode: w_i(u) = 1 + u_i^2 / (1 + u_i^2), bounded in [1, K] with K = 2.
  bool finsler = false;

  static constexpr double kWeightBound = 2.0;

  static PNormSpace euclidean(std::size_t n, double p = 2.0);

  /// Throws InputError on n = 0 or exponents outside (1, inf).
  void validate() const;

  Eigen::VectorXd weights(const State& anchor) const;
  Eigen::VectorXd reference_weights() const { return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)); }

  double norm(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const;
  double dual_norm(const Eigen::VectorXd& xi, const Eigen::VectorXd& w) const;
  double norm(const Eigen::VectorXd& v) const { return norm(v, reference_weights()); }
  double dual_norm(const Eigen::VectorXd& xi) const { return dual_norm(xi, reference_weights()); }
};

/// p-duality map: <xi, v> = ||v||^p = ||xi||_*^{p'}. Zero at v = 0.
Eigen::VectorXd jp_dual(const PNormSpace& sp, const Eigen::VectorXd& v, double p,
                        const Eigen::VectorXd& w);
Eigen::VectorXd jp_dual(const PNormSpace& sp, const Eigen::VectorXd& v, double p);

/// Inverse of jp_dual: the vector v with jp_dual(v, p) = xi.
Eigen::VectorXd jp_dual_inverse(const PNormSpace& sp, const Eigen::VectorXd& xi, double p,
                                const Eigen::VectorXd& w);

struct BanachFunctional {
  enum class Kind { quadratic, power, double_well, allen_cahn_1d };

  Kind kind = Kind::quadratic;
  double lambda = 1.0;
  double exponent = 2.0;  // r for the power kind, 2 for quadratic
  State center;
  double h = 1.0;  // quadrature weight of the double-well sum; grid spacing for Allen-Cahn

  /// (lambda/2) ||u - c||^2. lambda = 0 gives the constant functional.
  static BanachFunctional quadratic(std::size_t n, double lambda, State center = {});
  /// (lambda/r) ||u - c||^r.
  static BanachFunctional power(std::size_t n, double lambda, double r, State center = {});
  /// sum_i h (u_i^2 - 1)^2 / 4.
  static BanachFunctional double_well(std::size_t n, double h = 1.0);
  /// n interior nodes on (0,1), h = 1/(n+1), zero Dirichlet ends:
  /// sum_{i=0}^{n} h |(u_{i+1} - u_i)/h|^2 / 2 + sum_i h W(u_i).
  static BanachFunctional allen_cahn(std::size_t n);

  std::string name() const;
  double value(const PNormSpace& sp, const State& u) const;
  /// Frechet derivative as a covector (pair with vectors by the plain dot product).
  Eigen::VectorXd gradient(const PNormSpace& sp, const State& u) const;
  /// Declared (lambda, p) convexity modulus, when one is known.
  std::optional<ConvexityCertificate> certificate(const PNormSpace& sp) const;
  std::optional<State> minimizer() const;
};

/// Minimizes ||v - u_prev||^p / (p tau^(p-1)) + phi(v) with L-BFGS and backtracking,
/// warm-started at u_prev. In Finsler mode the norm is frozen at u_prev.
/// `residual` is ||J_p((v - u_prev)/tau) + D phi(v)||_*.
ProxResult banach_prox(const BanachFunctional& f, const PNormSpace& sp, const State& u_prev,
                       double tau, double p, const ProxOptions& options = {});

struct SlopeRepresentation {
  double value = 0.0;          // sup of the representation formula over the samples
  double plain_sup = 0.0;      // same samples without the (lambda/p) d^(p-1) term
  double gradient_norm = 0.0;  // ||D phi(u)||_*
  bool agrees = true;          // |value - gradient_norm| <= 2% (smooth kinds)
  bool fallback = false;       // no certificate: sampled local slope was used instead
};

SlopeRepresentation slope_repr_formula(const BanachFunctional& f, const PNormSpace& sp,
                                       const State& u, int sample_count, std::uint64_t seed);

struct KeyEstimateReport {
  std::size_t samples = 0;
  std::size_t lower_violations = 0;
  std::size_t upper_violations = 0;
  double worst_lower_margin = 0.0;  // min over samples of (phi - phi_bar) - (lambda/p) d^p
  double worst_upper_margin = 0.0;  // min over samples of slope^{p'}/(lambda p') - (phi - phi_bar)
  double max_lower_gap = 0.0;       // max |lower margin|, 0 when the chain is saturated
  double max_upper_gap = 0.0;
  double lambda = 0.0;
  double p = 0.0;
};

/// Samples `samples` states uniformly in the reference-norm ball of `radius` around the
/// exact minimizer and tests (lambda/p) d^p <= phi - phi_bar <= slope^{p'} / (lambda p')
/// with p the flow exponent of `sp`. Throws DomainError when lambda <= 0 or no exact
/// minimizer is known.
KeyEstimateReport key_estimate_check(const BanachFunctional& f, const PNormSpace& sp,
                                     std::size_t samples, std::uint64_t seed,
                                     double radius = 1.0);

class BanachBackend final : public MetricBackend {
 public:
  BanachBackend(PNormSpace space, BanachFunctional functional);

  const PNormSpace& space() const { return space_; }
  const BanachFunctional& functional() const { return f_; }

  std::string describe() const override;
  std::size_t dimension() const override { return space_.n; }
  double distance(const State& u, const State& v) const override;
  double energy(const State& u) const override;
  double slope(const State& u) const override;
  ProxResult prox(const State& prev, double step, double p,
                  const ProxOptions& options) const override;

  double step_distance(const State& anchor, const State& u, const State& v) const override;
  double step_slope(const State& anchor, const State& u) const override;
  bool frozen_metric() const override { return space_.finsler; }

  std::optional<ConvexityCertificate> convexity() const override;
  std::optional<State> exact_minimizer() const override;
  State perturb(const State& u, double radius, std::mt19937_64& rng) const override;
  State embed_sample(const State& center, double radius,
                     std::span<const double> unit_coords) const override;
  std::optional<State> critical_point(const State& seed, double tolerance,
                                      int max_iterations) const override;

 private:
  PNormSpace space_;
  BanachFunctional f_;
};

}  // namespace minmove
