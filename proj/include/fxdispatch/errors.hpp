#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace fxd {

// Malformed input: dimension mismatches, bad signs, parse failures.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A modelling assumption (connectivity, convexity, loss-coefficient bounds)
// does not hold, so a result that depends on it is undefined.
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solve failed to converge. Carries the best iterate found.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, Eigen::VectorXd best, double residual)
      : std::runtime_error(what), best_(std::move(best)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

}  // namespace fxd
