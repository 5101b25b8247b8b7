#include "minmove/numerics.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace minmove::numerics {

Eigen::VectorXd isotonic_projection(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<double> level;
  std::vector<Eigen::Index> count;
  level.reserve(static_cast<std::size_t>(n));
  count.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    level.push_back(x[i]);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double w1 = static_cast<double>(count[count.size() - 2]);
      const double w2 = static_cast<double>(count.back());
      const double merged = (w1 * level[level.size() - 2] + w2 * level.back()) / (w1 + w2);
      const Eigen::Index c = count[count.size() - 2] + count.back();
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = c;
    }
  }
  Eigen::VectorXd out(n);
  Eigen::Index k = 0;
  for (std::size_t b = 0; b < level.size(); ++b) {
    for (Eigen::Index j = 0; j < count[b]; ++j) out[k++] = level[b];
  }
  return out;
}

Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                  const Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  if (n == 0) return {};
  Eigen::VectorXd c(n), d(n);
  double denom = diag[0];
  c[0] = n > 1 ? off[0] / denom : 0.0;
  d[0] = rhs[0] / denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = diag[i] - off[i - 1] * c[i - 1];
    c[i] = i < n - 1 ? off[i] / denom : 0.0;
    d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
  }
  Eigen::VectorXd x(n);
  x[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("least_squares_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

double mean_log2_ratio(std::span<const double> errors) {
  double s = 0.0;
  int m = 0;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    if (errors[i] > 0.0 && errors[i - 1] > 0.0) {
      s += std::log2(errors[i - 1] / errors[i]);
      ++m;
    }
  }
  return m > 0 ? s / m : 0.0;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, const Eigen::VectorXd& state, double scalar) {
  std::uint64_t h = splitmix64(seed);
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    std::uint64_t bits;
    const double v = state[i];
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  std::uint64_t bits;
  std::memcpy(&bits, &scalar, sizeof bits);
  return splitmix64(h ^ bits);
}

std::vector<std::vector<double>> kronecker_points(std::size_t count, std::size_t dim,
                                                  std::uint64_t seed) {
  // Generalized golden ratio: unique positive root of x^(d+1) = x + 1.
  double phi = 2.0;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dim + 1));
  std::vector<double> alpha(dim), shift(dim);
  std::uint64_t s = splitmix64(seed);
  for (std::size_t j = 0; j < dim; ++j) {
    alpha[j] = std::fmod(std::pow(1.0 / phi, static_cast<double>(j + 1)), 1.0);
    s = splitmix64(s);
    shift[j] = static_cast<double>(s >> 11) * 0x1.0p-53;
  }
  std::vector<std::vector<double>> pts(count, std::vector<double>(dim));
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = shift[j] + alpha[j] * static_cast<double>(k + 1);
      pts[k][j] = v - std::floor(v);
    }
  }
  return pts;
}

}  // namespace minmove::numerics
