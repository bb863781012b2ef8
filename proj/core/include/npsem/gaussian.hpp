#pragma once

#include <Eigen/Core>

#include "npsem/random.hpp"

namespace npsem {

/// log N(x; mean, cov), normalization constant included.
/// Throws SingularCovariance (with the failing pivot) unless cov is
/// symmetric positive definite.
double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov);

/// Draw from N(mean, cov); cov may be positive semi-definite (a zero
/// covariance returns the mean exactly). Indefinite cov throws
/// SingularCovariance.
Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov, RandomStream& rng);

/// Factored multivariate normal for repeated density/sampling work with a
/// fixed covariance (one Cholesky, many evaluations).
class MvNormal {
 public:
  /// `for_sampling` tolerates semi-definite covariances (zero pivots give
  /// degenerate directions); density evaluation requires strict positive
  /// definiteness.
  explicit MvNormal(const Eigen::MatrixXd& cov, bool for_sampling = false);

  int dim() const { return static_cast<int>(chol_.rows()); }
  double log_normalizer() const { return log_norm_; }

  /// log N(resid; 0, cov). Only valid when constructed with
  /// for_sampling == false.
  double logpdf_residual(const Eigen::VectorXd& resid) const;

  Eigen::VectorXd sample(const Eigen::VectorXd& mean, RandomStream& rng) const;

  const Eigen::MatrixXd& cholesky_factor() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;  // lower triangular, cov = L L^T
  double log_norm_ = 0.0; // -(d/2) log(2 pi) - (1/2) log |cov|
  bool sampling_only_ = false;
};

}  // namespace npsem
