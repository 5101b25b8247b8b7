#pragma once

// One-dimensional Wasserstein backend. A probability measure is stored as its
// quantile values at the midpoint levels theta_i = (i - 1/2)/N; each consecutive
// pair of quantiles bounds a cell of mass 1/N, which gives the density used by
// the internal energy and its field.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minmove/metric_core.hpp"

namespace minmove::w1d {

inline constexpr std::size_t kMaxGrid = 4096;
/// Cells narrower than this carry no density (excluded from the field, +inf energy).
inline constexpr double kMinCellWidth = 1e-12;

struct QuantileMeasure {
  Eigen::VectorXd q;
  double p = 2.0;

  std::size_t size() const { return static_cast<std::size_t>(q.size()); }
  double mean() const;
  double variance() const;
  double moment() const;  // (1/N) sum |q_i|^p
  /// Throws InvariantError on decreasing quantiles, InputError on bad sizes.
  void validate() const;

  static std::vector<double> levels(std::size_t n);
  static QuantileMeasure gaussian(std::size_t n, double mean, double sd, double p = 2.0);
  static QuantileMeasure point_mass(std::size_t n, double at, double p = 2.0);
  static QuantileMeasure uniform(std::size_t n, double a, double b, double p = 2.0);
};

/// Standard normal quantile function.
double normal_quantile(double theta);

struct Potential {
  enum class Kind { quadratic, power, double_well };
  Kind kind = Kind::quadratic;
  double strength = 1.0;  // kappa
  double center = 0.0;
  double exponent = 2.0;  // power kind: kappa |x - c|^r / r

  double value(double x) const;
  double derivative(double x) const;
  double second(double x) const;
  /// Location of the global minimum.
  double argmin() const;
  /// Declared convexity modulus (min V'').
  std::optional<double> lambda() const;
};

struct InternalEnergy {
  enum class Kind { none, entropy, power };
  Kind kind = Kind::entropy;
  double m = 2.0;

  /// F(s): s log s or s^m / (m - 1).
  double F(double s) const;
  /// L_F(r) = r F'(r) - F(r): r for the entropy, r^m for the power kind.
  double L(double r) const;
  double dL(double r) const;
};

struct Interaction {
  enum class Kind { none, power };
  Kind kind = Kind::none;
  double exponent = 2.0;  // W(x) = |x|^r / r

  double value(double x) const;
  double derivative(double x) const;
  double second(double x) const;
};

struct EnergySpec {
  double c1 = 1.0;
  double c2 = 0.0;
  double c3 = 0.0;
  Potential V;
  InternalEnergy F;
  Interaction W;

  /// Coefficients must be >= 0 and c1 + c2 > 0 (pure interaction is excluded).
  void validate() const;
  std::string describe() const;
};

/// Exact 1D optimal transport cost ((1/N) sum |q_a - q_b|^p)^(1/p).
double wp_distance(const QuantileMeasure& a, const QuantileMeasure& b);
double wp_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double p);

double energy_eval(const EnergySpec& spec, const QuantileMeasure& mu);

/// f_i = c1 V'(q_i) + c2 N (L(rho_{i+1/2}) - L(rho_{i-1/2})) + c3 (1/N) sum_j W'(q_i - q_j),
/// with L = 0 outside the support and in cells narrower than kMinCellWidth.
/// Equals N d(phi)/d(q_i).
struct FieldEvaluation {
  Eigen::VectorXd field;
  double mass_deficit = 0.0;  // mass of excluded cells
  std::size_t excluded_cells = 0;
};
FieldEvaluation velocity_field(const EnergySpec& spec, const QuantileMeasure& mu);

/// ||f||_{L^{p'}(mu)}.
double wasserstein_slope(const EnergySpec& spec, const QuantileMeasure& mu);

struct JkoOptions {
  double tolerance = 1e-8;
  int max_iterations = 500;
};

/// Minimizes (1/(p tau^(p-1))) (1/N) sum |q_i - q_prev,i|^p + phi(q) over monotone q with
/// preconditioned projected Newton steps (tridiagonal model, isotonic projection,
/// Armijo backtracking) from q_prev. `residual` is the L^{p'}(mu) norm of the
/// projected gradient field.
ProxResult jko_step(const EnergySpec& spec, const QuantileMeasure& prev, double tau,
                    const JkoOptions& options = {});

/// Quantiles of exp(-c1 V / c2) / Z at the midpoint levels. Requires c3 = 0, entropy,
/// c1, c2 > 0; throws DomainError when the density is not integrable.
QuantileMeasure gibbs_stationary(const EnergySpec& spec, std::size_t n, double p = 2.0);

struct PdeResidualReport {
  double max_residual = 0.0;
  std::size_t worst_time = 0;  // sample index
  std::size_t worst_test = 0;
  std::vector<double> test_centers;
  double test_radius = 2.0;
};

/// Weak-form residual of d_t rho - div(rho j_{p'}(f)) = 0 against smooth bumps
/// (centers -3..3, radius 2), central differences in time at interior samples.
PdeResidualReport pde_residual(const EnergySpec& spec, const std::vector<double>& times,
                               const std::vector<QuantileMeasure>& states, double p);

class Wasserstein1DBackend final : public MetricBackend {
 public:
  Wasserstein1DBackend(EnergySpec spec, std::size_t n, double p = 2.0);

  const EnergySpec& spec() const { return spec_; }
  std::size_t grid_size() const { return n_; }
  double exponent() const { return p_; }
  QuantileMeasure measure(const State& q) const { return {q, p_}; }

  std::string describe() const override;
  std::size_t dimension() const override { return n_; }
  double distance(const State& u, const State& v) const override;
  double energy(const State& u) const override;
  double slope(const State& u) const override;
  ProxResult prox(const State& prev, double step, double p,
                  const ProxOptions& options) const override;

  std::optional<ConvexityCertificate> convexity() const override;
  /// Minimizer of the discretized energy (Gibbs case only).
  std::optional<State> exact_minimizer() const override { return minimizer_; }
  State perturb(const State& u, double radius, std::mt19937_64& rng) const override;
  State project(const State& u) const override;
  std::size_t sample_dimension() const override { return 2; }
  State embed_sample(const State& center, double radius,
                     std::span<const double> unit_coords) const override;
  std::optional<State> critical_point(const State& seed, double tolerance,
                                      int max_iterations) const override;

 private:
  EnergySpec spec_;
  std::size_t n_;
  double p_;
  std::optional<State> minimizer_;
};

}  // namespace minmove::w1d
