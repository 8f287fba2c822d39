#pragma once

#include <stdexcept>
#include <string>

namespace tsde {

// Caller broke a documented precondition (bad index, wrong action count, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A transition matrix is not row-stochastic.
class MalformedMatrixError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A chain is stochastic but not irreducible and aperiodic.
class ReducibleChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver ran out of budget. `residual` is the last span/gap seen.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// The active set of a single-arm problem did not shrink monotonically in the
// subsidy, so the arm is not indexable in the probed regime.
class IndexabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An observation has zero likelihood under every candidate in the grid.
class MisspecificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumerated state space would exceed the configured budget.
class StateBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tsde
