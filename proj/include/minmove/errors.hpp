#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace minmove {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (e.g. phi(u) = +inf, lambda <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (misaligned channels, duplicate sample times, grid mismatch).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A checked invariant does not hold (non-monotone quantiles, energy increase).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Scenario/config problems. Line and column are 1-based when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Inner minimization failure. Carries the best iterate found so far.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, Eigen::VectorXd best_iterate, double residual)
      : Error(what), best_(std::move(best_iterate)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const { return best_; }
  double residual() const { return residual_; }

  std::optional<std::size_t> node() const { return node_; }
  std::optional<double> partial_step() const { return partial_step_; }

  SolverError with_node(std::size_t node) const {
    SolverError e(std::string(what()) + " (node " + std::to_string(node) + ")", best_,
                  residual_);
    e.node_ = node;
    e.partial_step_ = partial_step_;
    return e;
  }

  SolverError with_partial_step(double delta, std::size_t node) const {
    SolverError e(std::string(what()) + " (De Giorgi partial step " + std::to_string(delta) +
                      ", node " + std::to_string(node) + ")",
                  best_, residual_);
    e.node_ = node;
    e.partial_step_ = delta;
    return e;
  }

 private:
  Eigen::VectorXd best_;
  double residual_;
  std::optional<std::size_t> node_;
  std::optional<double> partial_step_;
};

}  // namespace minmove
