#pragma once

#include <memory>

#include <Eigen/Core>

namespace npsem {

class DynamicalModel;

/// Noise parameterization: how Q and R are constrained during estimation.
enum class NoiseParameterization { kScalarIsotropic, kDiagonal, kFull };

/// Covariances of the model noise (Q, d x d) and observation noise
/// (R, d_obs x d_obs), plus the parameterization they live under.
class Theta {
 public:
  Theta() = default;
  Theta(Eigen::MatrixXd Q, Eigen::MatrixXd R, NoiseParameterization param);

  /// sigma^2 * I covariances.
  static Theta isotropic(int d, int d_obs, double sigma2_Q, double sigma2_R);

  const Eigen::MatrixXd& Q() const { return Q_; }
  const Eigen::MatrixXd& R() const { return R_; }
  NoiseParameterization parameterization() const { return param_; }

  int state_dim() const { return static_cast<int>(Q_.rows()); }
  int obs_dim() const { return static_cast<int>(R_.rows()); }

  /// Valid under the scalar-isotropic parameterization; exact round-trip.
  double sigma2_Q() const { return Q_(0, 0); }
  double sigma2_R() const { return R_(0, 0); }

  /// Project an unconstrained covariance pair onto `param`.
  static Eigen::MatrixXd project(const Eigen::MatrixXd& cov,
                                 NoiseParameterization param);

 private:
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd R_;
  NoiseParameterization param_ = NoiseParameterization::kScalarIsotropic;
};

/// Observation operator H: identity or a fixed linear map.
class ObservationOperator {
 public:
  ObservationOperator() = default;

  static ObservationOperator identity(int dim);
  static ObservationOperator linear(Eigen::MatrixXd H);

  bool is_identity() const { return identity_; }
  int state_dim() const { return state_dim_; }
  int obs_dim() const { return obs_dim_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return identity_ ? x : Eigen::VectorXd(H_ * x);
  }
  /// Columns are states.
  Eigen::MatrixXd apply_batch(const Eigen::MatrixXd& x) const {
    return identity_ ? x : Eigen::MatrixXd(H_ * x);
  }
  /// Materialized matrix (identity included), for moment-based smoothers.
  Eigen::MatrixXd matrix() const;

 private:
  bool identity_ = true;
  int state_dim_ = 0;
  int obs_dim_ = 0;
  Eigen::MatrixXd H_;
};

/// Initial state distribution N(mean, cov).
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Full state-space model: dynamics m, observation operator H, noise
/// covariances and the (known) initial distribution.
struct SsmSpec {
  std::shared_ptr<const DynamicalModel> dynamics;
  ObservationOperator obs_op;
  Theta theta;
  GaussianSpec initial;

  int state_dim() const { return static_cast<int>(initial.mean.size()); }
  int obs_dim() const { return obs_op.obs_dim(); }

  /// Throws std::invalid_argument when component dimensions disagree.
  void validate() const;
};

}  // namespace npsem
