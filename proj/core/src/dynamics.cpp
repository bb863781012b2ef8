#include "npsem/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "npsem/errors.hpp"

namespace npsem {

Eigen::VectorXd DynamicalModel::evaluate_one(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& z,
                                             int target_time) const {
  Eigen::MatrixXd out(state_dim(), 1);
  evaluate(x, z.size() ? Eigen::MatrixXd(z) : Eigen::MatrixXd(0, 1),
           target_time, out);
  return out.col(0);
}

Eigen::MatrixXd DynamicalModel::forecast_trajectory(
    const Eigen::Ref<const Eigen::MatrixXd>& trajectory,
    const CovariateSequence& covariates) const {
  const Eigen::Index horizon = trajectory.cols() - 1;
  if (horizon < 1) {
    throw std::invalid_argument("forecast_trajectory: trajectory too short");
  }
  Eigen::MatrixXd out(trajectory.rows(), horizon);
  const Eigen::MatrixXd no_cov(0, 1);
  for (int t = 1; t <= horizon; ++t) {
    const Eigen::MatrixXd z =
        covariates.empty() ? no_cov : Eigen::MatrixXd(covariates.value(t));
    evaluate(trajectory.col(t - 1), z, t, out.col(t - 1));
  }
  return out;
}

Eigen::VectorXd sinus_m(const Eigen::VectorXd& x) {
  return (3.0 * x.array()).sin();
}

void SinusModel::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                          const Eigen::Ref<const Eigen::MatrixXd>&,
                          int, Eigen::Ref<Eigen::MatrixXd> out) const {
  out = (3.0 * x.array()).sin();
}

Eigen::Vector3d l63_drift(const Eigen::Vector3d& z) {
  return {10.0 * (z[1] - z[0]), z[0] * (28.0 - z[2]) - z[1],
          z[0] * z[1] - (8.0 / 3.0) * z[2]};
}

namespace {

// Dormand-Prince 5th-order stage set, fixed step, 5th-order weights.
Eigen::Vector3d dopri5_step(const Eigen::Vector3d& y, double h) {
  const Eigen::Vector3d k1 = l63_drift(y);
  const Eigen::Vector3d k2 = l63_drift(y + h * (0.2 * k1));
  const Eigen::Vector3d k3 = l63_drift(y + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2));
  const Eigen::Vector3d k4 = l63_drift(
      y + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 + (32.0 / 9.0) * k3));
  const Eigen::Vector3d k5 =
      l63_drift(y + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 +
                         (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4));
  const Eigen::Vector3d k6 =
      l63_drift(y + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 +
                         (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4 -
                         (5103.0 / 18656.0) * k5));
  return y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 +
                  (125.0 / 192.0) * k4 - (2187.0 / 6784.0) * k5 +
                  (11.0 / 84.0) * k6);
}

Eigen::Vector3d rk4_step(const Eigen::Vector3d& y, double h) {
  const Eigen::Vector3d k1 = l63_drift(y);
  const Eigen::Vector3d k2 = l63_drift(y + 0.5 * h * k1);
  const Eigen::Vector3d k3 = l63_drift(y + 0.5 * h * k2);
  const Eigen::Vector3d k4 = l63_drift(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Eigen::Vector3d l63_flow(const Eigen::Vector3d& x, const Lorenz63Config& cfg) {
  if (!(cfg.dt > 0.0) || cfg.substeps < 1) {
    throw std::invalid_argument("l63_flow: dt must be positive, substeps >= 1");
  }
  const double h = cfg.dt / static_cast<double>(cfg.substeps);
  Eigen::Vector3d y = x;
  for (int s = 0; s < cfg.substeps; ++s) {
    y = cfg.tableau == RkTableau::kDormandPrince5 ? dopri5_step(y, h)
                                                  : rk4_step(y, h);
    if (!y.allFinite()) {
      throw IntegrationDiverged("l63_flow: state left the finite range");
    }
  }
  return y;
}

Lorenz63Model::Lorenz63Model(Lorenz63Config cfg) : cfg_(cfg) {
  if (!(cfg_.dt > 0.0) || cfg_.substeps < 1) {
    throw std::invalid_argument("Lorenz63Model: dt must be positive, substeps >= 1");
  }
}

void Lorenz63Model::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const Eigen::Ref<const Eigen::MatrixXd>&,
                             int, Eigen::Ref<Eigen::MatrixXd> out) const {
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    out.col(i) = l63_flow(x.col(i), cfg_);
  }
}

Eigen::VectorXd affine_m(const Eigen::VectorXd& x, const AffineModelParams& p) {
  return p.alpha * x + p.beta;
}

AffineModel::AffineModel(AffineModelParams params) : params_(std::move(params)) {
  if (params_.alpha.rows() != params_.beta.size() ||
      params_.alpha.cols() != params_.beta.size()) {
    throw std::invalid_argument("AffineModel: alpha must be d x d to match beta");
  }
  if (!params_.alpha.allFinite() || !params_.beta.allFinite()) {
    throw std::invalid_argument("AffineModel: parameters must be finite");
  }
}

void AffineModel::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                           const Eigen::Ref<const Eigen::MatrixXd>&,
                           int, Eigen::Ref<Eigen::MatrixXd> out) const {
  out = params_.alpha * x;
  out.colwise() += params_.beta;
}

std::shared_ptr<const DynamicalModel> make_model(
    const std::string& name, const Lorenz63Config& l63_cfg,
    const AffineModelParams* affine_params) {
  if (name == "sinus") return std::make_shared<SinusModel>();
  if (name == "l63") return std::make_shared<Lorenz63Model>(l63_cfg);
  if (name == "affine") {
    if (!affine_params) {
      throw std::invalid_argument("make_model: affine requires parameters");
    }
    return std::make_shared<AffineModel>(*affine_params);
  }
  throw std::invalid_argument("make_model: unknown model '" + name + "'");
}

}  // namespace npsem
