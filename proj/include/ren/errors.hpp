#pragma once

#include <stdexcept>
#include <string>

namespace ren {

// Process exit codes shared by the CLI and anything that reports through it.
enum class ExitCode : int {
  kOk = 0,
  kVerificationFailure = 1,
  kUsage = 2,
  kNumericalAbort = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const { return ExitCode::kUsage; }
};

// Shape or structure mismatch between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad file contents, unreadable paths, malformed configs.
class IoError : public Error {
 public:
  using Error::Error;
};

// Something numerical went wrong: singular factors, divergence, NaN.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kNumericalAbort; }
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// The requested IQC cannot be met by any feedthrough.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace ren
