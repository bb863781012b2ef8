#include "npsem/gaussian.hpp"

#include <cmath>
#include <stdexcept>

#include "npsem/errors.hpp"

namespace npsem {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// In-place lower Cholesky. Strict mode throws on any non-positive pivot;
// sampling mode zeroes directions whose pivot is within tolerance of zero
// and throws only on clearly negative pivots.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov, bool allow_semidefinite,
                               double* logdet_out) {
  const Eigen::Index d = cov.rows();
  if (cov.cols() != d) {
    throw std::invalid_argument("cholesky: covariance must be square");
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("cholesky: covariance must be symmetric");
  }
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = cov(j, j);
    for (Eigen::Index k = 0; k < j; ++k) s -= L(j, k) * L(j, k);
    if (allow_semidefinite) {
      if (s < -tol) {
        throw SingularCovariance(static_cast<int>(j),
                                 "covariance is indefinite at pivot " +
                                     std::to_string(j));
      }
      if (s <= tol) {
        // Degenerate direction: leave the column at zero.
        continue;
      }
    } else if (!(s > 0.0) || !std::isfinite(s)) {
      throw SingularCovariance(static_cast<int>(j),
                               "covariance is not positive definite at pivot " +
                                   std::to_string(j));
    }
    const double ljj = std::sqrt(s);
    L(j, j) = ljj;
    logdet += 2.0 * std::log(ljj);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double v = cov(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / ljj;
    }
  }
  if (logdet_out) *logdet_out = logdet;
  return L;
}

}  // namespace

MvNormal::MvNormal(const Eigen::MatrixXd& cov, bool for_sampling)
    : sampling_only_(for_sampling) {
  double logdet = 0.0;
  chol_ = cholesky_lower(cov, for_sampling, &logdet);
  log_norm_ = -0.5 * (static_cast<double>(cov.rows()) * kLog2Pi + logdet);
}

double MvNormal::logpdf_residual(const Eigen::VectorXd& resid) const {
  if (sampling_only_) {
    throw std::logic_error("MvNormal: density requested from a sampling-only factorization");
  }
  const Eigen::VectorXd half =
      chol_.triangularView<Eigen::Lower>().solve(resid);
  return log_norm_ - 0.5 * half.squaredNorm();
}

Eigen::VectorXd MvNormal::sample(const Eigen::VectorXd& mean,
                                 RandomStream& rng) const {
  return mean + chol_ * rng.normal_vector(chol_.rows());
}

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov) {
  if (x.size() != mean.size() || x.size() != cov.rows()) {
    throw std::invalid_argument("gaussian_logpdf: dimension mismatch");
  }
  MvNormal dist(cov, /*for_sampling=*/false);
  return dist.logpdf_residual(x - mean);
}

Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov, RandomStream& rng) {
  if (mean.size() != cov.rows()) {
    throw std::invalid_argument("gaussian_sample: dimension mismatch");
  }
  MvNormal dist(cov, /*for_sampling=*/true);
  return dist.sample(mean, rng);
}

}  // namespace npsem
