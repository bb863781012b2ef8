#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "npsem/dynamics.hpp"
#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/smoothing.hpp"

namespace npsem {

/// Origin of a catalog pair: trajectory index (1-based) and the successor's
/// time index t, i.e. the pair is (x_{t-1}, x_t) of that trajectory.
struct TimeTag {
  int traj = 0;
  int time = 0;
};

/// Immutable learning set of (predecessor (+ covariates), successor) pairs.
/// Covariate coordinates are standardized by their catalog standard
/// deviation for the neighbor metric only; regression and serialization see
/// raw values.
class Catalog {
 public:
  Catalog(Eigen::MatrixXd predecessors,  // d x M
          Eigen::MatrixXd covariates,    // p x M (p = 0 allowed)
          Eigen::MatrixXd successors,    // d x M
          std::vector<TimeTag> tags);

  int size() const { return static_cast<int>(succ_.cols()); }
  int state_dim() const { return static_cast<int>(succ_.rows()); }
  int cov_dim() const { return static_cast<int>(cov_scale_.size()); }
  int query_dim() const { return state_dim() + cov_dim(); }

  /// Raw query points [pred; cov], (d+p) x M.
  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::MatrixXd& successors() const { return succ_; }
  const std::vector<TimeTag>& tags() const { return tags_; }

  /// Standardization factors of the covariate coordinates (size p).
  const Eigen::VectorXd& covariate_scale() const { return cov_scale_; }

  /// Query points with covariate rows divided by their scale, (d+p) x M;
  /// the metric space of knn_search.
  const Eigen::MatrixXd& search_points() const { return search_; }
  Eigen::VectorXd scale_query(const Eigen::VectorXd& query) const;

 private:
  Eigen::MatrixXd points_;  // [pred; cov], raw
  Eigen::MatrixXd succ_;
  Eigen::MatrixXd search_;  // points_ with covariate rows standardized
  Eigen::VectorXd cov_scale_;
  std::vector<TimeTag> tags_;
};

/// Entries whose successor time lies in [time_lo, time_hi] on `trajectory`
/// (or on every trajectory) are removed from the admissible set.
struct ExclusionWindow {
  static constexpr int kAllTrajectories = -1;

  int trajectory = kAllTrajectories;
  int time_lo = 0;
  int time_hi = -1;  // empty window when time_hi < time_lo

  /// Lag-l window (t-l+1)..(t+l-1) around target time t; empty when l = 0
  /// or t is kNoTargetTime.
  static ExclusionWindow lag_window(int target_time, int lag,
                                    int trajectory = kAllTrajectories);

  bool empty() const { return time_hi < time_lo; }
  bool excludes(const TimeTag& tag) const {
    return (trajectory == kAllTrajectories || tag.traj == trajectory) &&
           tag.time >= time_lo && tag.time <= time_hi;
  }
};

struct LlrConfig {
  int k = 0;              // neighbor count; must be >= query_dim + 1 when used
  int lag_exclusion = 5;  // l; 0 disables the window
  std::vector<int> cv_grid;  // candidate k values; empty = default_cv_grid
  int cv_folds = 5;          // contiguous time blocks
  int cv_max_points = 2000;  // cap on scored queries per cross-validation
};

struct Neighbor {
  int index = -1;
  double dist = 0.0;  // Euclidean, in the standardized metric
};

/// (1 - |u|^3)^3 for |u| < 1, else 0; smooth at the support boundary.
double tricube_weight(double u);

/// Exact k nearest neighbors of `query` (raw coordinates) among admissible
/// catalog entries, via partial selection. Total order: (distance, traj,
/// time), so ties are deterministic. Returns ascending.
/// Throws InsufficientCatalog when fewer than k entries are admissible.
std::vector<Neighbor> knn_search(
    const Eigen::VectorXd& query, const Catalog& catalog, int k,
    const std::vector<ExclusionWindow>& exclusions = {});

/// Per-call fit diagnostics.
struct LlrFitInfo {
  bool fallback = false;  // rank-deficient local system; weighted mean used
};

/// Local linear prediction at `query`: tricube weights on the rectangular
/// k-NN support (per-coordinate half-widths; the overall weight is the
/// product of per-coordinate factors, a zero half-width contributing 1),
/// then weighted least squares of successors on [1, point - query]; the
/// intercept is the prediction. Rank deficiency falls back to the weighted
/// mean of successors.
Eigen::VectorXd llr_predict(const Eigen::VectorXd& query,
                            const Catalog& catalog, const LlrConfig& config,
                            const std::vector<ExclusionWindow>& exclusions = {},
                            LlrFitInfo* info = nullptr);

/// Candidate neighbor counts {M/100, M/50, M/20, M/10, M/5} (rounded up),
/// clipped to [query_dim + 2, M/2], deduplicated, ascending.
std::vector<int> default_cv_grid(int catalog_size, int query_dim);

/// Mean squared leave-fold-out prediction error for every candidate k
/// (aligned with the resolved grid, which is returned through `grid_out`
/// when non-null). Folds are contiguous blocks of successor times spanning
/// all trajectories; the lag-exclusion window also applies to each scored
/// query. When the catalog exceeds config.cv_max_points, scored queries are
/// subsampled deterministically from `rng`.
std::vector<double> cross_validate_scores(const Catalog& catalog,
                                          const LlrConfig& config,
                                          RandomStream& rng,
                                          std::vector<int>* grid_out = nullptr);

/// The candidate with the smallest score; ties go to the smaller k.
int cross_validate_k(const Catalog& catalog, const LlrConfig& config,
                     RandomStream& rng);

/// One pair per ensemble member i (tagged 1-based) and per t = 1..T:
/// predecessor x_{t-1}^{(i)} with z_t appended, successor x_t^{(i)}.
Catalog build_catalog(const SmoothingEnsemble& ensemble,
                      const CovariateSequence& covariates);

/// Single-trajectory catalogs (tagged trajectory 1).
Catalog catalog_from_states(const StateSequence& states,
                            const CovariateSequence& covariates);
/// Pairs of consecutive observed values (masked times break pairs); requires
/// at least two consecutive observed times.
Catalog catalog_from_observations(const ObservationSequence& obs,
                                  const CovariateSequence& covariates);

/// Nonparametric dynamics: LLR through a fixed catalog. Exclusion is driven
/// by the evaluation target time (window over all trajectories, since every
/// catalog trajectory replicates the same smoothing pass).
class LlrSurrogate final : public DynamicalModel {
 public:
  LlrSurrogate(std::shared_ptr<const Catalog> catalog, LlrConfig config);

  int state_dim() const override { return catalog_->state_dim(); }
  int covariate_dim() const override { return catalog_->cov_dim(); }
  std::string name() const override { return "llr-surrogate"; }

  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& z, int target_time,
                Eigen::Ref<Eigen::MatrixXd> out) const override;

  const Catalog& catalog() const { return *catalog_; }
  std::shared_ptr<const Catalog> catalog_ptr() const { return catalog_; }
  const LlrConfig& config() const { return config_; }

  /// Number of rank-deficiency fallbacks since construction.
  long fallback_count() const { return fallbacks_.load(); }

 private:
  std::shared_ptr<const Catalog> catalog_;
  LlrConfig config_;
  mutable std::atomic<long> fallbacks_{0};
};

/// Spec-facing convenience overload.
Eigen::VectorXd llr_predict(const Eigen::VectorXd& query,
                            const LlrSurrogate& surrogate,
                            const std::vector<ExclusionWindow>& exclusions = {},
                            LlrFitInfo* info = nullptr);

}  // namespace npsem
