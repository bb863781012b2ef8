#include "npsem/kalman.hpp"

#include <stdexcept>

#include <Eigen/Dense>

#include "npsem/dynamics.hpp"
#include "npsem/errors.hpp"
#include "npsem/gaussian.hpp"

namespace npsem {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

Eigen::LLT<Eigen::MatrixXd> factor_or_throw(const Eigen::MatrixXd& m,
                                            const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance(-1, std::string(what) +
                                     ": covariance factorization failed");
  }
  return llt;
}

}  // namespace

KalmanResult kalman_smoother(const SsmSpec& spec, const ObservationSequence& obs,
                             const CovariateSequence& covariates) {
  spec.validate();
  const auto* affine = dynamic_cast<const AffineModel*>(spec.dynamics.get());
  if (!affine) {
    throw std::invalid_argument("kalman_smoother: dynamics must be affine");
  }
  (void)covariates;  // the affine baseline does not consume covariates
  const Eigen::MatrixXd& alpha = affine->params().alpha;
  const Eigen::VectorXd& beta = affine->params().beta;
  const Eigen::MatrixXd H = spec.obs_op.matrix();
  const Eigen::MatrixXd& Q = spec.theta.Q();
  const Eigen::MatrixXd& R = spec.theta.R();

  const int d = spec.state_dim();
  const int horizon = obs.horizon();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  Eigen::MatrixXd filt_mean(d, horizon + 1);
  std::vector<Eigen::MatrixXd> filt_cov(static_cast<size_t>(horizon + 1));
  Eigen::MatrixXd pred_mean(d, horizon + 1);  // column t = E[x_t | y_1:t-1]
  std::vector<Eigen::MatrixXd> pred_cov(static_cast<size_t>(horizon + 1));

  filt_mean.col(0) = spec.initial.mean;
  filt_cov[0] = spec.initial.cov;
  double loglik = 0.0;

  for (int t = 1; t <= horizon; ++t) {
    pred_mean.col(t) = alpha * filt_mean.col(t - 1) + beta;
    pred_cov[static_cast<size_t>(t)] =
        symmetrize(alpha * filt_cov[static_cast<size_t>(t - 1)] *
                       alpha.transpose() +
                   Q);
    if (obs.observed(t)) {
      const Eigen::VectorXd y = obs.value(t);
      const Eigen::MatrixXd& pp = pred_cov[static_cast<size_t>(t)];
      const Eigen::MatrixXd S = symmetrize(H * pp * H.transpose() + R);
      const Eigen::VectorXd innov = y - H * pred_mean.col(t);
      loglik += gaussian_logpdf(y, H * pred_mean.col(t), S);
      const Eigen::LLT<Eigen::MatrixXd> llt =
          factor_or_throw(S, "kalman_smoother");
      // K = pp H' S^-1, computed as (S^-1 H pp')'.
      const Eigen::MatrixXd K = llt.solve(H * pp.transpose()).transpose();
      filt_mean.col(t) = pred_mean.col(t) + K * innov;
      const Eigen::MatrixXd A = eye - K * H;
      filt_cov[static_cast<size_t>(t)] =
          symmetrize(A * pp * A.transpose() + K * R * K.transpose());
    } else {
      filt_mean.col(t) = pred_mean.col(t);
      filt_cov[static_cast<size_t>(t)] = pred_cov[static_cast<size_t>(t)];
    }
  }

  KalmanResult out;
  out.means.resize(d, horizon + 1);
  out.covs.resize(static_cast<size_t>(horizon + 1));
  out.lag1.resize(static_cast<size_t>(horizon));
  out.loglik = loglik;

  out.means.col(horizon) = filt_mean.col(horizon);
  out.covs[static_cast<size_t>(horizon)] = filt_cov[static_cast<size_t>(horizon)];

  for (int t = horizon - 1; t >= 0; --t) {
    const Eigen::MatrixXd& pp = pred_cov[static_cast<size_t>(t + 1)];
    const Eigen::LLT<Eigen::MatrixXd> llt =
        factor_or_throw(pp, "kalman_smoother (backward)");
    // J_t = filt_cov_t alpha' pp^-1, computed as (pp^-1 alpha filt_cov')'.
    const Eigen::MatrixXd J =
        llt.solve(alpha * filt_cov[static_cast<size_t>(t)].transpose())
            .transpose();
    out.means.col(t) =
        filt_mean.col(t) + J * (out.means.col(t + 1) - pred_mean.col(t + 1));
    out.covs[static_cast<size_t>(t)] = symmetrize(
        filt_cov[static_cast<size_t>(t)] +
        J * (out.covs[static_cast<size_t>(t + 1)] - pp) * J.transpose());
    // Cov(x_{t+1}, x_t | y_1:T) = P_{t+1|T} J_t'.
    out.lag1[static_cast<size_t>(t)] =
        out.covs[static_cast<size_t>(t + 1)] * J.transpose();
  }
  return out;
}

}  // namespace npsem
