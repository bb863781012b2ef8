#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "npsem/config.hpp"
#include "npsem/dynamics.hpp"
#include "npsem/estimators.hpp"
#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/simulate.hpp"
#include "npsem/theta.hpp"
#include "npsem/wave.hpp"

namespace npsem {

/// Reconstruction error: sqrt of the mean squared distance between
/// reconstruction and truth over the selected times (1-based; empty selects
/// all t = 1..T). Throws EmptySelection when no time is selected.
double rmse(const StateSequence& reconstruction, const StateSequence& truth,
            const std::vector<int>& times = {});

/// Empirical quantile (linear interpolation between order statistics) of a
/// sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Lifts observations to a state trajectory usable as a conditioning
/// sequence: pinv(H)·y_t at observed times, linear interpolation across
/// gaps, edges extended flat; x_0 copies the t=1 lift.
StateSequence conditioning_from_observations(const ObservationSequence& y,
                                             const ObservationOperator& obs_op);

/// Scores of one fitted algorithm on the validation sequence.
struct ValidationScore {
  Eigen::MatrixXd mean;   // d x (T'+1) pooled smoothing mean
  Eigen::MatrixXd lower;  // d x (T'+1) empirical 2.5% band
  Eigen::MatrixXd upper;  // d x (T'+1) empirical 97.5% band
  double rmse = 0.0;
  double coverage95 = 0.0;             // all components pooled
  Eigen::VectorXd coverage_components; // per-component band coverage
  std::optional<double> rmse_gaps;     // masked-times-only error
};

/// Validation protocol: for each of the last rmse_tail iteration estimates
/// (theta and dynamics), re-run the configured smoother on the validation
/// sequence, pool the trajectories, and score the pooled mean and empirical
/// 95% band against the validation truth. CPF-BS chains are warmed up with a
/// few unpooled sweeps; gap_times (1-based) adds the masked-times-only RMSE.
ValidationScore reconstruct_validation(
    const SemResult& fit, const ObservationSequence& validation_y,
    const CovariateSequence& validation_z,
    const StateSequence& validation_truth, const GaussianSpec& initial,
    const ObservationOperator& obs_op, SmootherKind smoother,
    const SmootherConfig& smoother_cfg, int rmse_tail, RandomStream& rng,
    const std::vector<int>& gap_times = {});

/// One (replication, algorithm) outcome of the comparison.
struct AlgorithmScore {
  int replication = 1;
  std::string algorithm;
  bool ok = false;
  std::string error;  // failure diagnostic when !ok
  double rmse = 0.0;
  double coverage95 = 0.0;
  Eigen::VectorXd coverage_components;
  std::optional<double> rmse_gaps;
  Theta theta_final;  // tail-average over the trace
  EstimationTrace trace;
};

struct ReconstructionReport {
  std::vector<AlgorithmScore> entries;  // ordered by (replication, tag)
};

/// The true SSM described by the config (sinus / l63 / affine).
SsmSpec make_true_spec(const ExperimentConfig& cfg);
GaussianSpec default_initial(const std::string& model, int dim);

/// One replication's simulated data.
struct ReplicationData {
  SimulatedData learning;
  SimulatedData validation;
  CovariateSequence learning_z;
  CovariateSequence validation_z;
  std::vector<int> validation_gaps;  // masked validation times (1-based)
};
ReplicationData simulate_replication(const ExperimentConfig& cfg,
                                     int replication);

/// Shared initialization: EM + Kalman smoother on the learning sequence;
/// theta0 is its final estimate and conditioning0 its smoothing mean.
struct InitializationResult {
  Theta theta0;
  StateSequence conditioning0;
  EmLinearResult em;
};
InitializationResult em_initialize(const ObservationSequence& y,
                                   const GaussianSpec& initial,
                                   NoiseParameterization parameterization,
                                   int iterations = 100);

/// Runs one algorithm tag end to end on prepared data. fit_out (optional)
/// receives the raw estimation result (per-iteration dynamics, ensembles)
/// for snapshotting.
AlgorithmScore run_algorithm(const ExperimentConfig& cfg, int replication,
                             const std::string& tag,
                             const ReplicationData& data,
                             const InitializationResult& init,
                             SemResult* fit_out = nullptr);

/// The comparison experiment: per replication, simulate learning/validation
/// data, initialize via EM+KS, run every requested algorithm and score it.
/// Per-replication failures are recorded in the entries; the run continues.
ReconstructionReport run_comparison(const ExperimentConfig& cfg);

/// One imputation outcome (npSEM with covariates or the linear EM+KS
/// baseline) on wave-like data with gaps. Errors are on the log scale; the
/// emitted series are back-transformed to the raw scale.
struct ImputationEntry {
  int replication = 1;
  std::string algorithm;  // a comparison tag, or "em-ks" for the baseline
  bool ok = false;
  std::string error;
  double rmse = 0.0;
  std::optional<double> rmse_gaps;
  double coverage95 = 0.0;
  Eigen::VectorXd mean, lower, upper;  // raw scale, t = 1..T'
  Eigen::VectorXd truth_raw;           // validation hs
  Eigen::VectorXd obs_raw;             // noisy observations (NaN in gaps)
  std::vector<int> gap_times;          // 1-based validation gaps
  EstimationTrace trace;
};

/// Gap-imputation experiment on the config's wave data (synthetic generator
/// or CSV): always includes the "em-ks" baseline plus each requested
/// update-family algorithm (default cpf-bs-update).
std::vector<ImputationEntry> run_imputation(const ExperimentConfig& cfg);

/// Report emission; schemas documented in the README.
void write_report_csv(const std::string& path,
                      const ReconstructionReport& report);
void write_imputation_report_csv(const std::string& path,
                                 const std::vector<ImputationEntry>& entries);
void write_imputed_series_csv(const std::string& path,
                              const ImputationEntry& entry);

}  // namespace npsem
