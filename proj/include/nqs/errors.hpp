#pragma once

#include <stdexcept>
#include <string>

namespace nqs {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model parameters that do not describe a valid chain.
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

/// Site or block index outside the chain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between configurations, parameters and matrices.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent solver, experiment or file configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Refusal to enumerate or diagonalize beyond the memory guards.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (non-Hermitian generator, non-finite values, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Estimator asked to average over nothing.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Initial-state fit that did not reach its target infidelity.
class PreparationError : public NumericError {
 public:
  PreparationError(const std::string& what, double final_infidelity)
      : NumericError(what), final_infidelity_(final_infidelity) {}
  double final_infidelity() const noexcept { return final_infidelity_; }

 private:
  double final_infidelity_;
};

}  // namespace nqs
