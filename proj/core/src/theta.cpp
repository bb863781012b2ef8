#include "npsem/theta.hpp"

#include <stdexcept>

#include "npsem/dynamics.hpp"

namespace npsem {

namespace {
void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool is_symmetric(const Eigen::MatrixXd& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() == 0.0;
}
}  // namespace

Theta::Theta(Eigen::MatrixXd Q, Eigen::MatrixXd R, NoiseParameterization param)
    : Q_(std::move(Q)), R_(std::move(R)), param_(param) {
  require(is_symmetric(Q_), "Theta: Q must be symmetric");
  require(is_symmetric(R_), "Theta: R must be symmetric");
  if (param_ == NoiseParameterization::kScalarIsotropic) {
    require(Q_.isDiagonal(0.0) && R_.isDiagonal(0.0),
            "Theta: isotropic parameterization requires diagonal matrices");
    require((Q_.diagonal().array() == Q_(0, 0)).all() &&
                (R_.diagonal().array() == R_(0, 0)).all(),
            "Theta: isotropic parameterization requires constant diagonal");
  }
  require(Q_.diagonal().minCoeff() >= 0.0 && R_.diagonal().minCoeff() >= 0.0,
          "Theta: variances must be non-negative");
}

Theta Theta::isotropic(int d, int d_obs, double sigma2_Q, double sigma2_R) {
  require(sigma2_Q >= 0.0 && sigma2_R >= 0.0,
          "Theta: variances must be non-negative");
  Eigen::MatrixXd Q = sigma2_Q * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd R = sigma2_R * Eigen::MatrixXd::Identity(d_obs, d_obs);
  return Theta(std::move(Q), std::move(R), NoiseParameterization::kScalarIsotropic);
}

Eigen::MatrixXd Theta::project(const Eigen::MatrixXd& cov,
                               NoiseParameterization param) {
  const Eigen::Index d = cov.rows();
  switch (param) {
    case NoiseParameterization::kScalarIsotropic: {
      const double s2 = cov.trace() / static_cast<double>(d);
      return s2 * Eigen::MatrixXd::Identity(d, d);
    }
    case NoiseParameterization::kDiagonal:
      return cov.diagonal().asDiagonal();
    case NoiseParameterization::kFull:
      return 0.5 * (cov + cov.transpose());
  }
  throw std::logic_error("Theta::project: unknown parameterization");
}

ObservationOperator ObservationOperator::identity(int dim) {
  ObservationOperator op;
  op.identity_ = true;
  op.state_dim_ = dim;
  op.obs_dim_ = dim;
  return op;
}

ObservationOperator ObservationOperator::linear(Eigen::MatrixXd H) {
  require(H.size() > 0 && H.allFinite(),
          "ObservationOperator: matrix must be nonempty and finite");
  ObservationOperator op;
  op.identity_ = false;
  op.state_dim_ = static_cast<int>(H.cols());
  op.obs_dim_ = static_cast<int>(H.rows());
  op.H_ = std::move(H);
  return op;
}

Eigen::MatrixXd ObservationOperator::matrix() const {
  if (identity_) return Eigen::MatrixXd::Identity(obs_dim_, state_dim_);
  return H_;
}

void SsmSpec::validate() const {
  require(dynamics != nullptr, "SsmSpec: dynamics missing");
  const int d = state_dim();
  require(d >= 1, "SsmSpec: empty initial mean");
  require(initial.cov.rows() == d && initial.cov.cols() == d,
          "SsmSpec: initial covariance dimension mismatch");
  require(dynamics->state_dim() == d, "SsmSpec: dynamics dimension mismatch");
  require(obs_op.state_dim() == d, "SsmSpec: observation operator input mismatch");
  require(theta.state_dim() == d, "SsmSpec: Q dimension mismatch");
  require(theta.obs_dim() == obs_op.obs_dim(), "SsmSpec: R dimension mismatch");
}

}  // namespace npsem
