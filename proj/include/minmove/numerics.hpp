#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace minmove::numerics {

/// Least-squares projection onto non-decreasing vectors (pool adjacent violators).
Eigen::VectorXd isotonic_projection(const Eigen::VectorXd& x);

/// Solves a symmetric tridiagonal system with the Thomas algorithm.
/// `diag` has n entries, `off` has n-1 entries (sub == super diagonal).
Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                  const Eigen::VectorXd& rhs);

/// Trapezoid rule for samples y on grid x.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Ordinary least-squares slope of y against x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

/// Empirical convergence order log2(e_coarse / e_fine) averaged over a ladder of halvings.
double mean_log2_ratio(std::span<const double> errors);

/// Mixes a 64-bit seed with the bytes of a state and a scalar (splitmix64 chain).
std::uint64_t mix_seed(std::uint64_t seed, const Eigen::VectorXd& state, double scalar);

std::uint64_t splitmix64(std::uint64_t x);

/// Kronecker (additive recurrence) low-discrepancy point set in [0,1)^dim with a
/// seeded Cranley-Patterson shift.
std::vector<std::vector<double>> kronecker_points(std::size_t count, std::size_t dim,
                                                  std::uint64_t seed);

/// Dual exponent p' = p/(p-1).
inline double dual_exponent(double p) { return p / (p - 1.0); }

}  // namespace minmove::numerics
