#pragma once

#include <stdexcept>
#include <string>

namespace covcon {

/// Base of every error raised by the library. `exit_code()` is the CLI
/// status the error maps to: 2 user/validation, 3 I/O, 4 numerical.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

/// Violated precondition or malformed user input.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a closed-form expression.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Request that would exceed a configured memory budget.
class ResourceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Exact enumeration request over the subset budget.
class BudgetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Iterative kernel failed to converge; carries the achieved residual.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  int exit_code() const noexcept override { return 4; }
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace covcon
