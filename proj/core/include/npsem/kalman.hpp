#pragma once

#include <vector>

#include <Eigen/Core>

#include "npsem/sequences.hpp"
#include "npsem/theta.hpp"

namespace npsem {

/// Marginal smoothing moments of a linear-Gaussian SSM.
struct KalmanResult {
  Eigen::MatrixXd means;              // d x (T+1), column t = E[x_t | y_1:T]
  std::vector<Eigen::MatrixXd> covs;  // T+1 entries, Cov[x_t | y_1:T]
  /// T entries; entry t-1 = Cov(x_t, x_{t-1} | y_1:T), the lag-one
  /// cross-covariance consumed by the linear EM M-step.
  std::vector<Eigen::MatrixXd> lag1;
  double loglik = 0.0;  // exact observed-data log-likelihood
};

/// Exact Kalman filter + Rauch-Tung-Striebel smoother. Requires affine
/// dynamics (an AffineModel); masked observations skip the update step and
/// contribute nothing to the likelihood.
KalmanResult kalman_smoother(const SsmSpec& spec, const ObservationSequence& obs,
                             const CovariateSequence& covariates);

}  // namespace npsem
