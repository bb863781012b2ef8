#pragma once

#include <memory>
#include <string>

#include <Eigen/Core>

#include "npsem/sequences.hpp"

namespace npsem {

/// Time index a batch of queries is forecasting, used by catalog-backed
/// models to mask training pairs that would leak the target observation.
/// kNoTargetTime disables the exclusion (external/off-trajectory queries).
inline constexpr int kNoTargetTime = -1;

/// Deterministic one-step dynamics m(x, z), evaluated in batch over columns.
class DynamicalModel {
 public:
  virtual ~DynamicalModel() = default;

  virtual int state_dim() const = 0;
  virtual int covariate_dim() const { return 0; }
  virtual std::string name() const = 0;

  /// x: d x n states, z: p x n covariates (p = 0 allowed), out: d x n.
  /// target_time is the time index being predicted (see kNoTargetTime).
  virtual void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& z,
                        int target_time,
                        Eigen::Ref<Eigen::MatrixXd> out) const = 0;

  /// Single-query convenience wrapper.
  Eigen::VectorXd evaluate_one(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& z,
                               int target_time = kNoTargetTime) const;

  /// One-step forecasts along a trajectory (d x (T+1) matrix): column t-1 of
  /// the result is evaluate(x_{t-1}, z_t, target_time = t), so catalog-backed
  /// models apply the correct exclusion at every step.
  Eigen::MatrixXd forecast_trajectory(
      const Eigen::Ref<const Eigen::MatrixXd>& trajectory,
      const CovariateSequence& covariates) const;
};

/// x -> sin(3x) on R^1.
Eigen::VectorXd sinus_m(const Eigen::VectorXd& x);

class SinusModel final : public DynamicalModel {
 public:
  int state_dim() const override { return 1; }
  std::string name() const override { return "sinus"; }
  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& z, int target_time,
                Eigen::Ref<Eigen::MatrixXd> out) const override;
};

enum class RkTableau { kDormandPrince5, kClassicRk4 };

struct Lorenz63Config {
  double dt = 0.08;
  RkTableau tableau = RkTableau::kDormandPrince5;
  int substeps = 1;
};

/// Lorenz-63 drift g(z) with the standard (10, 28, 8/3) coefficients.
Eigen::Vector3d l63_drift(const Eigen::Vector3d& z);

/// Flow map of dz/dtau = g(z) over [0, cfg.dt] with fixed-step explicit RK.
/// Throws IntegrationDiverged if any stage leaves the finite range.
Eigen::Vector3d l63_flow(const Eigen::Vector3d& x, const Lorenz63Config& cfg);

class Lorenz63Model final : public DynamicalModel {
 public:
  explicit Lorenz63Model(Lorenz63Config cfg = {});

  const Lorenz63Config& config() const { return cfg_; }
  int state_dim() const override { return 3; }
  std::string name() const override { return "l63"; }
  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& z, int target_time,
                Eigen::Ref<Eigen::MatrixXd> out) const override;

 private:
  Lorenz63Config cfg_;
};

struct AffineModelParams {
  Eigen::MatrixXd alpha;  // d x d
  Eigen::VectorXd beta;   // d
};

/// x -> alpha * x + beta.
Eigen::VectorXd affine_m(const Eigen::VectorXd& x, const AffineModelParams& p);

class AffineModel final : public DynamicalModel {
 public:
  explicit AffineModel(AffineModelParams params);

  const AffineModelParams& params() const { return params_; }
  int state_dim() const override { return static_cast<int>(params_.beta.size()); }
  std::string name() const override { return "affine"; }
  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& z, int target_time,
                Eigen::Ref<Eigen::MatrixXd> out) const override;

 private:
  AffineModelParams params_;
};

/// Registry used by the CLI config ("sinus", "l63", "affine";
/// "llr-surrogate" is constructed through llr.hpp since it needs a catalog).
std::shared_ptr<const DynamicalModel> make_model(
    const std::string& name, const Lorenz63Config& l63_cfg = {},
    const AffineModelParams* affine_params = nullptr);

}  // namespace npsem
