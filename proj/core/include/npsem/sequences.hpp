#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace npsem {

/// Latent trajectory x_{0:T}, stored as a d x (T+1) matrix (column t holds x_t).
class StateSequence {
 public:
  StateSequence() = default;
  explicit StateSequence(Eigen::MatrixXd values);

  int dim() const { return static_cast<int>(values_.rows()); }
  /// Number of transitions; columns span t = 0..T.
  int horizon() const { return static_cast<int>(values_.cols()) - 1; }

  Eigen::VectorXd state(int t) const { return values_.col(t); }
  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

/// Observations y_{1:T} with a per-time availability mask (false = missing).
/// Column t-1 holds y_t. Reading a masked column is a contract violation and
/// throws, so no algorithm can silently consume a gap.
class ObservationSequence {
 public:
  ObservationSequence() = default;
  ObservationSequence(Eigen::MatrixXd values, std::vector<std::uint8_t> mask);
  /// Fully observed sequence.
  explicit ObservationSequence(Eigen::MatrixXd values);

  int dim() const { return static_cast<int>(values_.rows()); }
  int horizon() const { return static_cast<int>(values_.cols()); }

  bool observed(int t) const { return mask_[static_cast<size_t>(t - 1)] != 0; }
  int observed_count() const;

  /// y_t for t in 1..T; throws std::logic_error when masked.
  Eigen::VectorXd value(int t) const;

  void set_mask(int t, bool available) {
    mask_[static_cast<size_t>(t - 1)] = available ? 1 : 0;
  }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  const Eigen::MatrixXd& raw_values() const { return values_; }
  Eigen::MatrixXd& raw_values() { return values_; }

 private:
  Eigen::MatrixXd values_;
  std::vector<std::uint8_t> mask_;
};

/// Covariates z_{1:T} (column t-1 holds z_t); may be empty (p = 0).
class CovariateSequence {
 public:
  CovariateSequence() = default;
  explicit CovariateSequence(Eigen::MatrixXd values);

  bool empty() const { return values_.size() == 0; }
  int dim() const { return empty() ? 0 : static_cast<int>(values_.rows()); }
  int horizon() const { return static_cast<int>(values_.cols()); }

  /// z_t for t in 1..T; returns an empty vector when p = 0.
  Eigen::VectorXd value(int t) const {
    if (empty()) return Eigen::VectorXd();
    return values_.col(t - 1);
  }

  const Eigen::MatrixXd& raw_values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

}  // namespace npsem
