#pragma once

#include <stdexcept>
#include <string>

namespace qnls {

/// Invalid arguments or configuration; raised before any work is done.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values or overflow during a computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mathematical domain violation (e.g. a vanishing denominator).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A required input artifact is missing.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

class DegenerateSolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qnls
