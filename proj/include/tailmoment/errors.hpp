#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tailmoment {

// Bad arguments: wrong sizes, invariant violations, out-of-range parameters.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A_(1) == A_(k): the tail carries no scale information.
class DegenerateTail : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature or another numerical routine failed to reach its tolerance.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, std::vector<double> diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<double>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<double> diagnostics_;
};

class SingularDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WeakInstrumentSingularity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The caller asked for a decision from a table that never passed verification.
class UnverifiedTable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Size verification still failed after the doubled-grid retry. Diagnostics:
// max rejection, threshold, argmax xi, per attempt.
class CalibrationFailed : public std::runtime_error {
 public:
  CalibrationFailed(const std::string& what, std::vector<double> diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<double>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<double> diagnostics_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, std::vector<std::string> offenders)
      : std::runtime_error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

}  // namespace tailmoment
