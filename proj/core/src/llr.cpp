#include "npsem/llr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "npsem/errors.hpp"

namespace npsem {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("Catalog: non-finite ") + what);
  }
}

}  // namespace

Catalog::Catalog(Eigen::MatrixXd predecessors, Eigen::MatrixXd covariates,
                 Eigen::MatrixXd successors, std::vector<TimeTag> tags)
    : succ_(std::move(successors)), tags_(std::move(tags)) {
  const Eigen::Index d = succ_.rows();
  const Eigen::Index m = succ_.cols();
  const Eigen::Index p = covariates.size() == 0 ? 0 : covariates.rows();
  if (m < 1) throw std::invalid_argument("Catalog: empty");
  if (predecessors.rows() != d || predecessors.cols() != m) {
    throw std::invalid_argument("Catalog: predecessor/successor shape mismatch");
  }
  if (p > 0 && covariates.cols() != m) {
    throw std::invalid_argument("Catalog: covariate count mismatch");
  }
  if (tags_.size() != static_cast<size_t>(m)) {
    throw std::invalid_argument("Catalog: tag count mismatch");
  }
  check_finite(predecessors, "predecessors");
  check_finite(succ_, "successors");
  if (p > 0) check_finite(covariates, "covariates");

  points_.resize(d + p, m);
  points_.topRows(d) = predecessors;
  if (p > 0) points_.bottomRows(p) = covariates;

  cov_scale_.resize(p);
  for (Eigen::Index c = 0; c < p; ++c) {
    const double mu = covariates.row(c).mean();
    const double var =
        (covariates.row(c).array() - mu).square().sum() / static_cast<double>(m);
    const double sd = std::sqrt(var);
    cov_scale_[c] = sd > 0.0 ? sd : 1.0;
  }

  search_ = points_;
  for (Eigen::Index c = 0; c < p; ++c) {
    search_.row(d + c) /= cov_scale_[c];
  }
}

Eigen::VectorXd Catalog::scale_query(const Eigen::VectorXd& query) const {
  if (query.size() != query_dim()) {
    throw std::invalid_argument("Catalog: query dimension mismatch");
  }
  Eigen::VectorXd q = query;
  const int d = state_dim();
  for (int c = 0; c < cov_dim(); ++c) q[d + c] /= cov_scale_[c];
  return q;
}

ExclusionWindow ExclusionWindow::lag_window(int target_time, int lag,
                                            int trajectory) {
  ExclusionWindow w;
  w.trajectory = trajectory;
  if (lag > 0 && target_time != kNoTargetTime) {
    w.time_lo = target_time - lag + 1;
    w.time_hi = target_time + lag - 1;
  } else {
    w.time_lo = 0;
    w.time_hi = -1;
  }
  return w;
}

double tricube_weight(double u) {
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  const double b = 1.0 - a * a * a;
  return b * b * b;
}

namespace {

struct Candidate {
  double dist2;
  int index;
};

/// Strict weak order realizing the (distance, traj, time) tie-break.
struct CandidateLess {
  const std::vector<TimeTag>* tags;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    const TimeTag& ta = (*tags)[static_cast<size_t>(a.index)];
    const TimeTag& tb = (*tags)[static_cast<size_t>(b.index)];
    if (ta.traj != tb.traj) return ta.traj < tb.traj;
    return ta.time < tb.time;
  }
};

template <typename Admissible>
std::vector<Neighbor> knn_core(const Eigen::VectorXd& raw_query,
                               const Catalog& catalog, int k,
                               Admissible admissible) {
  if (k < 1) throw std::invalid_argument("knn_search: k must be positive");
  const Eigen::VectorXd q = catalog.scale_query(raw_query);
  const Eigen::MatrixXd& pts = catalog.search_points();
  const int m = catalog.size();
  const int dim = catalog.query_dim();
  const double* base = pts.data();
  const double* qp = q.data();

  std::vector<Candidate> cands;
  cands.reserve(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    if (!admissible(j)) continue;
    const double* col = base + static_cast<size_t>(j) * dim;
    double d2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double diff = col[c] - qp[c];
      d2 += diff * diff;
    }
    cands.push_back({d2, j});
  }
  if (static_cast<int>(cands.size()) < k) {
    throw InsufficientCatalog(
        static_cast<long>(cands.size()),
        "knn_search: only " + std::to_string(cands.size()) +
            " admissible entries for k = " + std::to_string(k));
  }

  const CandidateLess less{&catalog.tags()};
  std::nth_element(cands.begin(), cands.begin() + (k - 1), cands.end(), less);
  std::sort(cands.begin(), cands.begin() + k, less);

  std::vector<Neighbor> out(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    out[static_cast<size_t>(i)] = {cands[static_cast<size_t>(i)].index,
                                   std::sqrt(cands[static_cast<size_t>(i)].dist2)};
  }
  return out;
}

bool any_excludes(const std::vector<ExclusionWindow>& ws, const TimeTag& tag) {
  for (const auto& w : ws) {
    if (!w.empty() && w.excludes(tag)) return true;
  }
  return false;
}

/// Tricube weights on the rectangular support of the neighbor set: the
/// per-coordinate half-width is the largest absolute offset from the query,
/// and a degenerate (all-zero) weight vector falls back to uniform.
Eigen::VectorXd support_weights(const Eigen::VectorXd& query,
                                const Catalog& catalog,
                                const std::vector<Neighbor>& nb) {
  const int k = static_cast<int>(nb.size());
  const int dim = catalog.query_dim();
  const Eigen::MatrixXd& pts = catalog.points();

  Eigen::MatrixXd diff(dim, k);
  for (int i = 0; i < k; ++i) {
    diff.col(i) = pts.col(nb[static_cast<size_t>(i)].index) - query;
  }
  const Eigen::VectorXd half_width = diff.cwiseAbs().rowwise().maxCoeff();

  Eigen::VectorXd w = Eigen::VectorXd::Ones(k);
  for (int c = 0; c < dim; ++c) {
    if (half_width[c] <= 0.0) continue;
    for (int i = 0; i < k; ++i) {
      w[i] *= tricube_weight(diff(c, i) / half_width[c]);
    }
  }
  if (w.sum() <= 0.0) w.setOnes();
  return w;
}

Eigen::VectorXd fit_local(const Eigen::VectorXd& query, const Catalog& catalog,
                          const std::vector<Neighbor>& nb, LlrFitInfo* info) {
  const int k = static_cast<int>(nb.size());
  const int dim = catalog.query_dim();
  const int d = catalog.state_dim();
  const Eigen::VectorXd w = support_weights(query, catalog, nb);

  Eigen::MatrixXd design(k, dim + 1);
  Eigen::MatrixXd target(k, d);
  for (int i = 0; i < k; ++i) {
    const int j = nb[static_cast<size_t>(i)].index;
    const double sw = std::sqrt(w[i]);
    design(i, 0) = sw;
    design.row(i).tail(dim) = sw * (catalog.points().col(j) - query).transpose();
    target.row(i) = sw * catalog.successors().col(j).transpose();
  }

  if (k >= dim + 1) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == dim + 1) {
      const Eigen::MatrixXd beta = qr.solve(target);
      Eigen::VectorXd pred = beta.row(0).transpose();
      if (pred.allFinite()) {
        if (info) info->fallback = false;
        return pred;
      }
    }
  }

  // Rank-deficient or otherwise degenerate local system: weighted mean.
  if (info) info->fallback = true;
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < k; ++i) {
    pred += w[i] * catalog.successors().col(nb[static_cast<size_t>(i)].index);
  }
  return pred / w.sum();
}

}  // namespace

std::vector<Neighbor> knn_search(const Eigen::VectorXd& query,
                                 const Catalog& catalog, int k,
                                 const std::vector<ExclusionWindow>& exclusions) {
  const auto& tags = catalog.tags();
  if (exclusions.empty()) {
    return knn_core(query, catalog, k, [](int) { return true; });
  }
  return knn_core(query, catalog, k, [&](int j) {
    return !any_excludes(exclusions, tags[static_cast<size_t>(j)]);
  });
}

Eigen::VectorXd llr_predict(const Eigen::VectorXd& query,
                            const Catalog& catalog, const LlrConfig& config,
                            const std::vector<ExclusionWindow>& exclusions,
                            LlrFitInfo* info) {
  if (config.k < catalog.query_dim() + 1) {
    throw std::invalid_argument(
        "llr_predict: k must be at least query_dim + 1 (k = " +
        std::to_string(config.k) + ")");
  }
  const std::vector<Neighbor> nb =
      knn_search(query, catalog, config.k, exclusions);
  return fit_local(query, catalog, nb, info);
}

Eigen::VectorXd llr_predict(const Eigen::VectorXd& query,
                            const LlrSurrogate& surrogate,
                            const std::vector<ExclusionWindow>& exclusions,
                            LlrFitInfo* info) {
  return llr_predict(query, surrogate.catalog(), surrogate.config(), exclusions,
                     info);
}

std::vector<int> default_cv_grid(int catalog_size, int query_dim) {
  const int lo = query_dim + 2;
  const int hi = catalog_size / 2;
  if (hi < lo) {
    throw InsufficientCatalog(catalog_size,
                              "default_cv_grid: catalog too small for any k");
  }
  std::vector<int> grid;
  for (int div : {100, 50, 20, 10, 5}) {
    int k = (catalog_size + div - 1) / div;
    k = std::clamp(k, lo, hi);
    if (grid.empty() || grid.back() != k) grid.push_back(k);
  }
  return grid;
}

namespace {

/// Contiguous blocks of successor times. fold_of[time - t_min] gives the
/// fold of every admissible time; entries are grouped by time value so all
/// trajectories of a time land in the same fold.
struct TimeFolds {
  int t_min = 0;
  std::vector<int> fold_of;  // indexed by time - t_min

  int fold(int time) const { return fold_of[static_cast<size_t>(time - t_min)]; }
};

TimeFolds make_folds(const Catalog& catalog, int n_folds) {
  std::vector<int> times;
  times.reserve(static_cast<size_t>(catalog.size()));
  for (const auto& tag : catalog.tags()) times.push_back(tag.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const int n_times = static_cast<int>(times.size());
  if (n_folds < 2 || n_folds > n_times) {
    throw std::invalid_argument("cross_validate: need 2 <= folds <= #times");
  }
  TimeFolds f;
  f.t_min = times.front();
  f.fold_of.assign(static_cast<size_t>(times.back() - times.front() + 1), -1);
  for (int i = 0; i < n_times; ++i) {
    const int fold = static_cast<int>(
        (static_cast<long>(i) * n_folds) / n_times);
    f.fold_of[static_cast<size_t>(times[static_cast<size_t>(i)] - f.t_min)] =
        fold;
  }
  return f;
}

/// Deterministic subsample of `quota` elements (order preserved).
std::vector<int> subsample(std::vector<int> items, int quota,
                           RandomStream rng) {
  const int n = static_cast<int>(items.size());
  if (quota >= n) return items;
  // Partial Fisher-Yates, then restore index order for cache-friendly scans.
  for (int i = 0; i < quota; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(
                          static_cast<uint64_t>(n - i)));
    std::swap(items[static_cast<size_t>(i)], items[static_cast<size_t>(j)]);
  }
  items.resize(static_cast<size_t>(quota));
  std::sort(items.begin(), items.end());
  return items;
}

}  // namespace

std::vector<double> cross_validate_scores(const Catalog& catalog,
                                          const LlrConfig& config,
                                          RandomStream& rng,
                                          std::vector<int>* grid_out) {
  std::vector<int> grid = config.cv_grid.empty()
                              ? default_cv_grid(catalog.size(),
                                                catalog.query_dim())
                              : config.cv_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty() || grid.front() < catalog.query_dim() + 1) {
    throw std::invalid_argument("cross_validate: invalid candidate grid");
  }
  const int max_k = grid.back();

  const TimeFolds folds = make_folds(catalog, config.cv_folds);
  const int m = catalog.size();

  std::vector<std::vector<int>> fold_members(
      static_cast<size_t>(config.cv_folds));
  for (int j = 0; j < m; ++j) {
    fold_members[static_cast<size_t>(folds.fold(catalog.tags()[static_cast<size_t>(j)].time))]
        .push_back(j);
  }
  for (int f = 0; f < config.cv_folds; ++f) {
    const int train = m - static_cast<int>(fold_members[static_cast<size_t>(f)].size());
    if (max_k > train) {
      throw InsufficientCatalog(
          train, "cross_validate: candidate k = " + std::to_string(max_k) +
                     " exceeds training size " + std::to_string(train));
    }
  }

  std::vector<double> sq_err(grid.size(), 0.0);
  long scored = 0;

  for (int f = 0; f < config.cv_folds; ++f) {
    std::vector<int>& queries = fold_members[static_cast<size_t>(f)];
    if (config.cv_max_points > 0 && m > config.cv_max_points) {
      const int quota = std::max(
          1, static_cast<int>((static_cast<long>(config.cv_max_points) *
                               static_cast<long>(queries.size())) /
                              m));
      queries = subsample(std::move(queries), quota,
                          rng.lane(rng_lane::kCrossValidation,
                                   static_cast<uint64_t>(f)));
    }

    for (int j : queries) {
      const TimeTag& tag = catalog.tags()[static_cast<size_t>(j)];
      const auto in_fold_or_lagged = [&](int e) {
        const TimeTag& te = catalog.tags()[static_cast<size_t>(e)];
        if (folds.fold(te.time) == f) return false;
        return config.lag_exclusion <= 0 ||
               std::abs(te.time - tag.time) > config.lag_exclusion - 1;
      };
      const Eigen::VectorXd query = catalog.points().col(j);
      const std::vector<Neighbor> nb =
          knn_core(query, catalog, max_k, in_fold_or_lagged);
      for (size_t g = 0; g < grid.size(); ++g) {
        const std::vector<Neighbor> prefix(
            nb.begin(), nb.begin() + grid[g]);
        const Eigen::VectorXd pred = fit_local(query, catalog, prefix, nullptr);
        sq_err[g] += (pred - catalog.successors().col(j)).squaredNorm();
      }
      ++scored;
    }
  }

  if (scored == 0) {
    throw InsufficientCatalog(0, "cross_validate: no queries scored");
  }
  for (double& s : sq_err) s /= static_cast<double>(scored);
  if (grid_out) *grid_out = grid;
  return sq_err;
}

int cross_validate_k(const Catalog& catalog, const LlrConfig& config,
                     RandomStream& rng) {
  std::vector<int> grid;
  const std::vector<double> scores =
      cross_validate_scores(catalog, config, rng, &grid);
  size_t best = 0;
  for (size_t g = 1; g < scores.size(); ++g) {
    if (scores[g] < scores[best]) best = g;
  }
  return grid[best];
}

Catalog build_catalog(const SmoothingEnsemble& ensemble,
                      const CovariateSequence& covariates) {
  ensemble.validate();
  const int n = ensemble.size();
  const int d = ensemble.dim();
  const int horizon = ensemble.horizon();
  const int p = covariates.dim();
  if (p > 0 && covariates.horizon() < horizon) {
    throw std::invalid_argument("build_catalog: covariates shorter than horizon");
  }

  const int m = n * horizon;
  Eigen::MatrixXd pred(d, m);
  Eigen::MatrixXd cov(p, m);
  Eigen::MatrixXd succ(d, m);
  std::vector<TimeTag> tags(static_cast<size_t>(m));

  int col = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd& traj = ensemble.member(i);
    for (int t = 1; t <= horizon; ++t, ++col) {
      pred.col(col) = traj.col(t - 1);
      succ.col(col) = traj.col(t);
      if (p > 0) cov.col(col) = covariates.value(t);
      tags[static_cast<size_t>(col)] = {i + 1, t};
    }
  }
  return Catalog(std::move(pred), std::move(cov), std::move(succ),
                 std::move(tags));
}

Catalog catalog_from_states(const StateSequence& states,
                            const CovariateSequence& covariates) {
  SmoothingEnsemble e;
  e.trajectories.push_back(states.values());
  e.source = EnsembleSource::kKsGaussianDraw;
  return build_catalog(e, covariates);
}

Catalog catalog_from_observations(const ObservationSequence& obs,
                                  const CovariateSequence& covariates) {
  const int d = obs.dim();
  const int horizon = obs.horizon();
  const int p = covariates.dim();
  if (p > 0 && covariates.horizon() < horizon) {
    throw std::invalid_argument(
        "catalog_from_observations: covariates shorter than horizon");
  }

  std::vector<int> times;  // successor times with both ends observed
  for (int t = 2; t <= horizon; ++t) {
    if (obs.observed(t - 1) && obs.observed(t)) times.push_back(t);
  }
  if (times.empty()) {
    throw InsufficientCatalog(
        0, "catalog_from_observations: no consecutive observed pairs");
  }

  const int m = static_cast<int>(times.size());
  Eigen::MatrixXd pred(d, m);
  Eigen::MatrixXd cov(p, m);
  Eigen::MatrixXd succ(d, m);
  std::vector<TimeTag> tags(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const int t = times[static_cast<size_t>(j)];
    pred.col(j) = obs.value(t - 1);
    succ.col(j) = obs.value(t);
    if (p > 0) cov.col(j) = covariates.value(t);
    tags[static_cast<size_t>(j)] = {1, t};
  }
  return Catalog(std::move(pred), std::move(cov), std::move(succ),
                 std::move(tags));
}

LlrSurrogate::LlrSurrogate(std::shared_ptr<const Catalog> catalog,
                           LlrConfig config)
    : catalog_(std::move(catalog)), config_(std::move(config)) {
  if (!catalog_) throw std::invalid_argument("LlrSurrogate: null catalog");
  if (config_.k < catalog_->query_dim() + 1) {
    throw std::invalid_argument("LlrSurrogate: k below query_dim + 1");
  }
}

void LlrSurrogate::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::MatrixXd>& z,
                            int target_time,
                            Eigen::Ref<Eigen::MatrixXd> out) const {
  const int d = catalog_->state_dim();
  const int p = catalog_->cov_dim();
  if (x.rows() != d || out.rows() != d || out.cols() != x.cols()) {
    throw std::invalid_argument("LlrSurrogate: state dimension mismatch");
  }
  if (p > 0 && (z.rows() != p || z.cols() != x.cols())) {
    throw DynamicsError("LlrSurrogate: covariates required but not supplied");
  }

  std::vector<ExclusionWindow> excl;
  const ExclusionWindow w =
      ExclusionWindow::lag_window(target_time, config_.lag_exclusion);
  if (!w.empty()) excl.push_back(w);

  Eigen::VectorXd query(d + p);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    query.head(d) = x.col(i);
    if (p > 0) query.tail(p) = z.col(i);
    LlrFitInfo info;
    out.col(i) = llr_predict(query, *catalog_, config_, excl, &info);
    if (info.fallback) fallbacks_.fetch_add(1, std::memory_order_relaxed);
  }
}

}  // namespace npsem
