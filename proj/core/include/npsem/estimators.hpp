#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "npsem/dynamics.hpp"
#include "npsem/llr.hpp"
#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/smoothing.hpp"
#include "npsem/theta.hpp"

namespace npsem {

/// One row of an estimation run. Record 0 is the initialization.
struct TraceRecord {
  int iter = 0;
  Theta theta;
  /// Monte Carlo intermediate function I(theta_r | ensemble_r); for the
  /// exact linear EM this is the exact observed-data log-likelihood.
  double loglik_proxy = 0.0;
  std::optional<int> k_selected;
  std::optional<int> catalog_id;  // snapshot id = iteration that built it
  double wallclock_s = 0.0;
};

struct EstimationTrace {
  std::vector<TraceRecord> records;

  int iterations() const {
    return records.empty() ? -1 : records.back().iter;
  }
};

enum class SmootherKind { kCpfBs, kEnks };

std::string to_string(SmootherKind kind);

/// Switchboard of the stochastic estimation loops.
struct NpSemConfig {
  int iterations = 50;  // R_max
  SmootherKind smoother = SmootherKind::kCpfBs;
  bool catalog_update = true;
  LlrConfig llr;
  SmootherConfig smoother_cfg;
  int cv_every = 10;  // re-select k every this many iterations

  void validate() const;
};

/// log p(x_0) + sum_t log N(x_t; m(x_{t-1}, z_t), Q)
///            + sum_{t observed} log N(y_t; H x_t, R).
double complete_loglik(const StateSequence& x, const ObservationSequence& y,
                       const CovariateSequence& z,
                       const DynamicalModel& dynamics, const Theta& theta,
                       const SsmSpec& spec);

/// Monte Carlo intermediate function: the ensemble average of
/// complete_loglik over the smoothing trajectories.
double intermediate_I_hat(const SmoothingEnsemble& ensemble,
                          const ObservationSequence& y,
                          const CovariateSequence& z,
                          const DynamicalModel& dynamics, const Theta& theta,
                          const SsmSpec& spec);

/// Closed-form Gaussian noise update: Q from transition residuals, R from
/// observation residuals at observed times, both projected onto the
/// parameterization. Variances are floored at 1e-10. Throws NoObservations
/// when no time step is observed.
Theta m_step_gaussian(const SmoothingEnsemble& ensemble,
                      const ObservationSequence& y, const CovariateSequence& z,
                      const DynamicalModel& dynamics,
                      const ObservationOperator& obs_op,
                      NoiseParameterization parameterization);

struct EmLinearOptions {
  bool estimate_dynamics = true;  // refit (alpha, beta) each M-step
  bool estimate_Q = true;
  bool estimate_R = true;
};

struct EmLinearResult {
  EstimationTrace trace;       // loglik_proxy = exact log-likelihood
  AffineModelParams params;    // final dynamics estimate
  Theta theta;                 // final noise estimate
  Eigen::MatrixXd smoothing_means;             // under the final estimates
  std::vector<Eigen::MatrixXd> smoothing_covs;
  double loglik = 0.0;
};

/// Exact EM for the affine-Gaussian model: E-step = Kalman smoother moments,
/// M-step = closed-form (alpha, beta, Q, R) updates. The log-likelihood is
/// non-decreasing across iterations.
EmLinearResult em_linear(const SsmSpec& spec, const ObservationSequence& y,
                         const CovariateSequence& z, int iterations,
                         const EmLinearOptions& options = {});

struct SemResult {
  EstimationTrace trace;
  SmoothingEnsemble last_ensemble;
  StateSequence final_conditioning;
  /// Final dynamics estimate (npsem with catalog updates); otherwise the
  /// fixed input dynamics.
  std::shared_ptr<const DynamicalModel> final_dynamics;
  /// Dynamics paired with each trace record (m̂_r alongside θ̂_r); without
  /// catalog updates every entry aliases the input dynamics. Validation
  /// re-runs the smoother with these per-iteration estimates.
  std::vector<std::shared_ptr<const DynamicalModel>> dynamics_by_record;
  /// Set when the loop aborted on a numeric failure; the trace holds the
  /// iterations completed before the abort.
  std::optional<std::string> error;
};

/// Stochastic EM with fixed dynamics (Algorithm 1 shape): E-step simulates a
/// smoothing ensemble (CPF-BS or EnKS), M-step refits (Q, R).
SemResult sem(std::shared_ptr<const DynamicalModel> dynamics,
              const Theta& theta0, const StateSequence& conditioning0,
              const ObservationSequence& y, const CovariateSequence& z,
              const GaussianSpec& initial, const ObservationOperator& obs_op,
              const NpSemConfig& cfg, RandomStream& rng);

/// Nonparametric SEM (Algorithm 2 shape): as sem, but when
/// cfg.catalog_update is set the M-step also rebuilds the LLR surrogate from
/// the fresh ensemble (catalog update), re-selecting k every cfg.cv_every
/// iterations. With catalog_update = false this is exactly sem on the fixed
/// surrogate.
SemResult npsem(const Theta& theta0, std::shared_ptr<const LlrSurrogate> m0,
                const StateSequence& conditioning0,
                const ObservationSequence& y, const CovariateSequence& z,
                const GaussianSpec& initial, const ObservationOperator& obs_op,
                const NpSemConfig& cfg, RandomStream& rng);

/// Element-wise average of (Q, R) over the last `tail` records.
Theta tail_average_theta(const EstimationTrace& trace, int tail);

}  // namespace npsem
