#pragma once

#include <stdexcept>
#include <string>

namespace npsem {

/// Base class for numeric failures raised by the estimation stack.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Covariance factorization failed; `pivot` is the index of the first
/// non-positive Cholesky pivot.
class SingularCovariance : public NumericError {
 public:
  SingularCovariance(int pivot, const std::string& what)
      : NumericError(what), pivot_(pivot) {}
  int pivot() const { return pivot_; }

 private:
  int pivot_ = -1;
};

/// Every particle weight vanished at time step `t`.
class WeightCollapse : public NumericError {
 public:
  WeightCollapse(int t, const std::string& what) : NumericError(what), t_(t) {}
  int time_index() const { return t_; }

 private:
  int t_ = -1;
};

/// Fewer admissible catalog entries than requested neighbors.
class InsufficientCatalog : public NumericError {
 public:
  InsufficientCatalog(long admissible, const std::string& what)
      : NumericError(what), admissible_(admissible) {}
  long admissible() const { return admissible_; }

 private:
  long admissible_ = 0;
};

class DynamicsError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IntegrationDiverged : public DynamicsError {
 public:
  using DynamicsError::DynamicsError;
};

class NoObservations : public NumericError {
 public:
  using NumericError::NumericError;
};

class EmptySelection : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnsupportedGapPattern : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Invalid or inconsistent user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace npsem
