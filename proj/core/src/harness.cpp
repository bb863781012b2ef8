#include "npsem/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "npsem/cpf_bs.hpp"
#include "npsem/csv.hpp"
#include "npsem/enks.hpp"
#include "npsem/errors.hpp"
#include "npsem/kalman.hpp"
#include "npsem/llr.hpp"
#include "npsem/parallel.hpp"

namespace npsem {

namespace {

// CPF-BS chains on the validation sequence: unpooled warm-up sweeps before
// the pooled one (more for the first tail estimate, the chain then stays
// warm across neighboring estimates).
constexpr int kWarmupFirst = 5;
constexpr int kWarmupNext = 2;

constexpr double kZ975 = 1.959963984540054;  // Phi^{-1}(0.975)

std::vector<int> all_times(int horizon) {
  std::vector<int> t(static_cast<size_t>(horizon));
  for (int i = 1; i <= horizon; ++i) t[static_cast<size_t>(i - 1)] = i;
  return t;
}

}  // namespace

double rmse(const StateSequence& reconstruction, const StateSequence& truth,
            const std::vector<int>& times) {
  if (reconstruction.dim() != truth.dim() ||
      reconstruction.horizon() != truth.horizon()) {
    throw std::invalid_argument("rmse: sequence shapes differ");
  }
  const int horizon = truth.horizon();
  const std::vector<int>& sel = times.empty() ? all_times(horizon) : times;
  if (sel.empty()) throw EmptySelection("rmse: empty time selection");
  double acc = 0.0;
  for (int t : sel) {
    if (t < 1 || t > horizon) {
      throw std::invalid_argument("rmse: time index out of range");
    }
    acc += (reconstruction.state(t) - truth.state(t)).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(sel.size()));
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (p <= 0) return sorted.front();
  if (p >= 1) return sorted.back();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

StateSequence conditioning_from_observations(const ObservationSequence& y,
                                             const ObservationOperator& obs_op) {
  const int horizon = y.horizon();
  const int d = obs_op.state_dim();
  if (y.observed_count() == 0) {
    throw NoObservations("conditioning: fully masked sequence");
  }
  Eigen::MatrixXd lift = obs_op.matrix()
                             .completeOrthogonalDecomposition()
                             .pseudoInverse();

  Eigen::MatrixXd x(d, horizon + 1);
  std::vector<int> observed;
  for (int t = 1; t <= horizon; ++t) {
    if (y.observed(t)) {
      x.col(t) = lift * y.value(t);
      observed.push_back(t);
    }
  }
  // flat edges, linear interpolation inside gaps
  for (int t = 1; t < observed.front(); ++t) x.col(t) = x.col(observed.front());
  for (int t = observed.back() + 1; t <= horizon; ++t) {
    x.col(t) = x.col(observed.back());
  }
  for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
    const int a = observed[i];
    const int b = observed[i + 1];
    for (int t = a + 1; t < b; ++t) {
      const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
      x.col(t) = (1.0 - w) * x.col(a) + w * x.col(b);
    }
  }
  x.col(0) = x.col(1);
  return StateSequence(std::move(x));
}

ValidationScore reconstruct_validation(
    const SemResult& fit, const ObservationSequence& validation_y,
    const CovariateSequence& validation_z,
    const StateSequence& validation_truth, const GaussianSpec& initial,
    const ObservationOperator& obs_op, SmootherKind smoother,
    const SmootherConfig& smoother_cfg, int rmse_tail, RandomStream& rng,
    const std::vector<int>& gap_times) {
  const auto& records = fit.trace.records;
  if (rmse_tail < 1 || static_cast<int>(records.size()) < rmse_tail) {
    throw std::invalid_argument("validation: trace shorter than rmse_tail");
  }
  if (fit.dynamics_by_record.size() != records.size()) {
    throw std::invalid_argument("validation: missing per-iteration dynamics");
  }
  const std::size_t first = records.size() - static_cast<std::size_t>(rmse_tail);
  const int horizon = validation_y.horizon();
  const int d = validation_truth.dim();

  std::vector<Eigen::MatrixXd> pooled;
  int sweep = 0;
  StateSequence conditioning;
  if (smoother == SmootherKind::kCpfBs) {
    conditioning = conditioning_from_observations(validation_y, obs_op);
  }
  for (std::size_t j = 0; j < static_cast<std::size_t>(rmse_tail); ++j) {
    const TraceRecord& rec = records[first + j];
    const SsmSpec spec{fit.dynamics_by_record[first + j], obs_op, rec.theta,
                       initial};
    if (smoother == SmootherKind::kCpfBs) {
      const int warmup = j == 0 ? kWarmupFirst : kWarmupNext;
      for (int b = 0; b <= warmup; ++b) {
        RandomStream srng = rng.lane(rng_lane::kIteration,
                                     static_cast<uint64_t>(++sweep));
        const ParticleSystem ps = cpf(spec, validation_y, validation_z,
                                      conditioning, smoother_cfg, srng);
        const SmoothingEnsemble ens = backward_simulation(
            ps, rec.theta, smoother_cfg.n_smooth, srng);
        conditioning = update_conditioning(ens, srng);
        if (b == warmup) {
          pooled.insert(pooled.end(), ens.trajectories.begin(),
                        ens.trajectories.end());
        }
      }
    } else {
      RandomStream srng =
          rng.lane(rng_lane::kIteration, static_cast<uint64_t>(++sweep));
      SmoothingEnsemble ens =
          enks(spec, validation_y, validation_z, smoother_cfg, srng);
      pooled.insert(pooled.end(),
                    std::make_move_iterator(ens.trajectories.begin()),
                    std::make_move_iterator(ens.trajectories.end()));
    }
  }

  ValidationScore score;
  score.mean = Eigen::MatrixXd::Zero(d, horizon + 1);
  for (const Eigen::MatrixXd& traj : pooled) score.mean += traj;
  score.mean /= static_cast<double>(pooled.size());

  score.lower.resize(d, horizon + 1);
  score.upper.resize(d, horizon + 1);
  std::vector<double> sample(pooled.size());
  for (int t = 0; t <= horizon; ++t) {
    for (int j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        sample[i] = pooled[i](j, t);
      }
      std::sort(sample.begin(), sample.end());
      score.lower(j, t) = quantile_sorted(sample, 0.025);
      score.upper(j, t) = quantile_sorted(sample, 0.975);
    }
  }

  score.coverage_components = Eigen::VectorXd::Zero(d);
  for (int t = 1; t <= horizon; ++t) {
    for (int j = 0; j < d; ++j) {
      const double truth = validation_truth.state(t)(j);
      if (score.lower(j, t) <= truth && truth <= score.upper(j, t)) {
        score.coverage_components(j) += 1.0;
      }
    }
  }
  score.coverage_components /= static_cast<double>(horizon);
  score.coverage95 = score.coverage_components.mean();
  score.rmse = rmse(StateSequence(score.mean), validation_truth);
  if (!gap_times.empty()) {
    score.rmse_gaps = rmse(StateSequence(score.mean), validation_truth,
                           gap_times);
  }
  return score;
}

GaussianSpec default_initial(const std::string& model, int dim) {
  GaussianSpec g;
  if (model == "l63") {
    g.mean = Eigen::Vector3d(1.508870, -1.531271, 25.46091);
    g.cov = Eigen::MatrixXd::Identity(3, 3);
    return g;
  }
  g.mean = Eigen::VectorXd::Zero(dim);
  g.cov = Eigen::MatrixXd::Identity(dim, dim);
  return g;
}

SsmSpec make_true_spec(const ExperimentConfig& cfg) {
  std::shared_ptr<const DynamicalModel> dyn;
  if (cfg.model == "sinus") {
    dyn = std::make_shared<SinusModel>();
  } else if (cfg.model == "l63") {
    Lorenz63Config l63;
    l63.dt = cfg.dt;
    dyn = std::make_shared<Lorenz63Model>(l63);
  } else if (cfg.model == "affine") {
    dyn = std::make_shared<AffineModel>(
        AffineModelParams{cfg.affine.alpha, cfg.affine.beta});
  } else {
    throw ConfigError("model '" + cfg.model + "' has no simulator");
  }
  const int d = dyn->state_dim();
  return SsmSpec{dyn, ObservationOperator::identity(d), cfg.true_theta,
                 default_initial(cfg.model, d)};
}

ReplicationData simulate_replication(const ExperimentConfig& cfg,
                                     int replication) {
  const SsmSpec spec = make_true_spec(cfg);
  const RandomStream rep_rng = RandomStream(cfg.seeds)
                                   .lane(rng_lane::kReplication,
                                         static_cast<uint64_t>(replication));
  ReplicationData data;
  RandomStream lrng = rep_rng.lane(rng_lane::kSimulateLearning);
  data.learning = simulate_ssm(spec, cfg.T, data.learning_z, lrng);
  RandomStream vrng = rep_rng.lane(rng_lane::kSimulateValidation);
  data.validation = simulate_ssm(spec, cfg.T_prime, data.validation_z, vrng);
  return data;
}

InitializationResult em_initialize(const ObservationSequence& y,
                                   const GaussianSpec& initial,
                                   NoiseParameterization parameterization,
                                   int iterations) {
  const int d = static_cast<int>(initial.mean.size());
  AffineModelParams params;
  params.alpha = 0.9 * Eigen::MatrixXd::Identity(d, d);
  params.beta = Eigen::VectorXd::Zero(d);
  const SsmSpec spec{std::make_shared<AffineModel>(params),
                     ObservationOperator::identity(d),
                     Theta(Eigen::MatrixXd::Identity(d, d),
                           Eigen::MatrixXd::Identity(d, d), parameterization),
                     initial};
  InitializationResult out;
  out.em = em_linear(spec, y, CovariateSequence(), iterations);
  out.theta0 = out.em.theta;
  out.conditioning0 = StateSequence(out.em.smoothing_means);
  return out;
}

namespace {

struct TagTraits {
  SmootherKind smoother;
  int variant;  // 0 update, 1 no-update, 2 perfect, 3 true-m
};

TagTraits tag_traits(const std::string& tag) {
  const int idx = algorithm_index(tag);
  if (idx < 0) throw ConfigError("unknown algorithm tag '" + tag + "'");
  return {idx < 4 ? SmootherKind::kCpfBs : SmootherKind::kEnks, idx % 4};
}

std::shared_ptr<const LlrSurrogate> build_surrogate(Catalog catalog,
                                                    LlrConfig llr,
                                                    RandomStream cv_rng) {
  auto shared = std::make_shared<const Catalog>(std::move(catalog));
  if (llr.k <= 0) llr.k = cross_validate_k(*shared, llr, cv_rng);
  return std::make_shared<const LlrSurrogate>(std::move(shared),
                                              std::move(llr));
}

}  // namespace

AlgorithmScore run_algorithm(const ExperimentConfig& cfg, int replication,
                             const std::string& tag,
                             const ReplicationData& data,
                             const InitializationResult& init,
                             SemResult* fit_out) {
  AlgorithmScore entry;
  entry.replication = replication;
  entry.algorithm = tag;

  const TagTraits traits = tag_traits(tag);
  const SsmSpec true_spec = make_true_spec(cfg);
  const int d = true_spec.state_dim();
  const ObservationOperator obs_op = ObservationOperator::identity(d);
  const GaussianSpec initial = default_initial(cfg.model, d);

  NpSemConfig ncfg = cfg.npsem;
  ncfg.smoother = traits.smoother;
  ncfg.catalog_update = traits.variant == 0;

  const RandomStream alg_rng =
      RandomStream(cfg.seeds)
          .lane(rng_lane::kReplication, static_cast<uint64_t>(replication))
          .lane(rng_lane::kAlgorithm,
                static_cast<uint64_t>(algorithm_index(tag) + 1));

  try {
    SemResult fit;
    RandomStream loop_rng = alg_rng;
    if (traits.variant == 3) {
      fit = sem(true_spec.dynamics, init.theta0, init.conditioning0,
                data.learning.obs, data.learning_z, initial, obs_op, ncfg,
                loop_rng);
    } else {
      Catalog catalog = [&] {
        switch (traits.variant) {
          case 0:
            return catalog_from_states(init.conditioning0, data.learning_z);
          case 1:
            if (data.learning.obs.dim() != d) {
              throw DynamicsError(
                  "no-update variant needs full-state observations");
            }
            return catalog_from_observations(data.learning.obs,
                                             data.learning_z);
          default:
            return catalog_from_states(data.learning.states, data.learning_z);
        }
      }();
      auto m0 = build_surrogate(std::move(catalog), ncfg.llr,
                                alg_rng.lane(rng_lane::kCrossValidation));
      if (traits.variant == 0) {
        fit = npsem(init.theta0, m0, init.conditioning0, data.learning.obs,
                    data.learning_z, initial, obs_op, ncfg, loop_rng);
      } else {
        fit = sem(m0, init.theta0, init.conditioning0, data.learning.obs,
                  data.learning_z, initial, obs_op, ncfg, loop_rng);
      }
    }

    entry.trace = fit.trace;
    if (fit.error) {
      entry.error = "iteration " +
                    std::to_string(fit.trace.iterations() + 1) + ": " +
                    *fit.error;
      if (fit_out) *fit_out = std::move(fit);
      return entry;
    }
    entry.theta_final = tail_average_theta(fit.trace, cfg.rmse_tail);

    RandomStream vrng = alg_rng.lane(rng_lane::kValidation);
    const ValidationScore score = reconstruct_validation(
        fit, data.validation.obs, data.validation_z, data.validation.states,
        initial, obs_op, traits.smoother, ncfg.smoother_cfg, cfg.rmse_tail,
        vrng, data.validation_gaps);
    entry.rmse = score.rmse;
    entry.coverage95 = score.coverage95;
    entry.coverage_components = score.coverage_components;
    entry.rmse_gaps = score.rmse_gaps;
    entry.ok = true;
    if (fit_out) *fit_out = std::move(fit);
  } catch (const NumericError& e) {
    entry.ok = false;
    if (entry.error.empty()) entry.error = e.what();
  }
  return entry;
}

namespace {

std::vector<std::string> resolve_tags(const std::vector<std::string>& requested) {
  if (requested.empty()) {
    return {kAlgorithmTags.begin(), kAlgorithmTags.end()};
  }
  std::vector<std::string> tags;
  for (const char* tag : kAlgorithmTags) {
    if (std::find(requested.begin(), requested.end(), tag) != requested.end()) {
      tags.emplace_back(tag);
    }
  }
  return tags;
}

}  // namespace

ReconstructionReport run_comparison(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.model == "csv-data") {
    throw ConfigError("compare needs a simulable model; use impute");
  }
  const std::vector<std::string> tags = resolve_tags(cfg.algorithms);
  const std::size_t n_tags = tags.size();

  ReconstructionReport report;
  report.entries.resize(static_cast<std::size_t>(cfg.replications) * n_tags);

  parallel_for(static_cast<std::size_t>(cfg.replications), [&](std::size_t ri) {
    const int rep = static_cast<int>(ri) + 1;
    ReplicationData data;
    InitializationResult init;
    try {
      data = simulate_replication(cfg, rep);
      init = em_initialize(data.learning.obs,
                           default_initial(cfg.model, cfg.state_dim()),
                           cfg.true_theta.parameterization());
    } catch (const NumericError& e) {
      for (std::size_t ti = 0; ti < n_tags; ++ti) {
        AlgorithmScore& entry = report.entries[ri * n_tags + ti];
        entry.replication = rep;
        entry.algorithm = tags[ti];
        entry.ok = false;
        entry.error = std::string("initialization: ") + e.what();
      }
      return;
    }
    for (std::size_t ti = 0; ti < n_tags; ++ti) {
      report.entries[ri * n_tags + ti] =
          run_algorithm(cfg, rep, tags[ti], data, init);
    }
  });
  return report;
}

std::vector<ImputationEntry> run_imputation(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.model != "csv-data") {
    throw ConfigError("impute requires model = csv-data");
  }
  std::vector<std::string> tags = cfg.algorithms;
  if (tags.empty()) tags = {"cpf-bs-update"};
  for (const std::string& tag : tags) {
    if (tag_traits(tag).variant == 3) {
      throw ConfigError("'" + tag + "' needs the true model, unavailable here");
    }
  }

  WaveSeries whole;
  if (!cfg.wave.data_path.empty()) {
    whole = load_wave_csv(cfg.wave.data_path);
    if (whole.length() < cfg.T + cfg.T_prime) {
      throw ConfigError("wave data shorter than T + T_prime");
    }
  }

  const std::size_t per_rep = tags.size() + 1;  // em-ks baseline first
  std::vector<ImputationEntry> entries(
      static_cast<std::size_t>(cfg.replications) * per_rep);

  parallel_for(static_cast<std::size_t>(cfg.replications), [&](std::size_t ri) {
    const int rep = static_cast<int>(ri) + 1;
    const RandomStream rep_rng =
        RandomStream(cfg.seeds)
            .lane(rng_lane::kReplication, static_cast<uint64_t>(rep));

    WaveSeries learn_series, val_series;
    if (cfg.wave.data_path.empty()) {
      RandomStream lw = rep_rng.lane(rng_lane::kWave, 1);
      learn_series = synthesize_wave(cfg.T, lw);
      RandomStream vw = rep_rng.lane(rng_lane::kWave, 2);
      val_series = synthesize_wave(cfg.T_prime, vw);
    } else {
      // validation = fixed tail window; learning = seeded window before it
      const int val_start = whole.length() - cfg.T_prime;
      RandomStream lw = rep_rng.lane(rng_lane::kWave, 1);
      const int max_start = val_start - cfg.T;
      const int start =
          static_cast<int>(lw.uniform_index(static_cast<uint64_t>(max_start + 1)));
      learn_series.hs = whole.hs.segment(start, cfg.T);
      learn_series.covariates = whole.covariates.middleCols(start, cfg.T);
      val_series.hs = whole.hs.segment(val_start, cfg.T_prime);
      val_series.covariates = whole.covariates.middleCols(val_start, cfg.T_prime);
    }
    if (learn_series.covariates.hasNaN() || val_series.covariates.hasNaN()) {
      throw UnsupportedGapPattern("impute: covariates must be complete");
    }
    if (learn_series.hs.hasNaN() || val_series.hs.hasNaN() ||
        (learn_series.hs.array() <= 0).any() ||
        (val_series.hs.array() <= 0).any()) {
      throw ConfigError("impute: hs must be present and positive");
    }

    // log-scale truth with x_0 seeded by the first value
    auto to_truth = [](const Eigen::VectorXd& hs) {
      Eigen::MatrixXd x(1, hs.size() + 1);
      x.row(0).tail(hs.size()) = hs.array().log().matrix().transpose();
      x(0, 0) = x(0, 1);
      return StateSequence(std::move(x));
    };
    const StateSequence truth_l = to_truth(learn_series.hs);
    const StateSequence truth_v = to_truth(val_series.hs);

    auto make_obs = [&](const StateSequence& truth, uint64_t noise_lane,
                        uint64_t gap_lane, std::vector<int>* gaps_out) {
      const int horizon = truth.horizon();
      RandomStream nrng = rep_rng.lane(rng_lane::kObsPerturb, noise_lane);
      Eigen::MatrixXd y(1, horizon);
      for (int t = 1; t <= horizon; ++t) {
        y(0, t - 1) = truth.state(t)(0) + cfg.wave.noise_sd * nrng.normal();
      }
      ObservationSequence obs(std::move(y));
      RandomStream grng = rep_rng.lane(rng_lane::kGaps, gap_lane);
      const std::vector<int> gaps = expand_gaps(
          sample_gap_starts(horizon, cfg.wave.gap_length, cfg.wave.n_gaps,
                            grng),
          cfg.wave.gap_length, horizon);
      for (int t : gaps) obs.set_mask(t, false);
      if (gaps_out) *gaps_out = gaps;
      return obs;
    };
    std::vector<int> gaps_v;
    const ObservationSequence y_l = make_obs(truth_l, 1, 1, nullptr);
    const ObservationSequence y_v = make_obs(truth_v, 2, 2, &gaps_v);

    const CovariateSequence z_l(learn_series.covariates);
    const CovariateSequence z_v(val_series.covariates);
    const ObservationOperator obs_op = ObservationOperator::identity(1);

    // data-driven x_0 prior: moments of the observed learning values
    GaussianSpec initial;
    {
      double sum = 0.0, sq = 0.0;
      int n = 0;
      for (int t = 1; t <= y_l.horizon(); ++t) {
        if (!y_l.observed(t)) continue;
        const double v = y_l.value(t)(0);
        sum += v;
        sq += v * v;
        ++n;
      }
      const double mean = sum / n;
      initial.mean = Eigen::VectorXd::Constant(1, mean);
      initial.cov = Eigen::MatrixXd::Constant(
          1, 1, std::max(1e-4, sq / n - mean * mean));
    }

    auto fill_series = [&](ImputationEntry& entry, const Eigen::MatrixXd& mean,
                           const Eigen::MatrixXd& lower,
                           const Eigen::MatrixXd& upper) {
      const int horizon = truth_v.horizon();
      entry.mean.resize(horizon);
      entry.lower.resize(horizon);
      entry.upper.resize(horizon);
      entry.truth_raw = val_series.hs;
      entry.obs_raw.setConstant(horizon,
                                std::numeric_limits<double>::quiet_NaN());
      for (int t = 1; t <= horizon; ++t) {
        entry.mean(t - 1) = std::exp(mean(0, t));
        entry.lower(t - 1) = std::exp(lower(0, t));
        entry.upper(t - 1) = std::exp(upper(0, t));
        if (y_v.observed(t)) entry.obs_raw(t - 1) = std::exp(y_v.value(t)(0));
      }
      entry.gap_times = gaps_v;
    };

    InitializationResult init;
    {
      ImputationEntry& entry = entries[ri * per_rep];
      entry.replication = rep;
      entry.algorithm = "em-ks";
      try {
        init = em_initialize(y_l, initial, NoiseParameterization::kScalarIsotropic);
        const SsmSpec fitted{
            std::make_shared<AffineModel>(init.em.params), obs_op,
            init.em.theta, initial};
        const KalmanResult ks = kalman_smoother(fitted, y_v, z_v);
        const int horizon = truth_v.horizon();
        Eigen::MatrixXd lower(1, horizon + 1), upper(1, horizon + 1);
        Eigen::VectorXd cover = Eigen::VectorXd::Zero(1);
        for (int t = 0; t <= horizon; ++t) {
          const double sd = std::sqrt(ks.covs[static_cast<size_t>(t)](0, 0));
          lower(0, t) = ks.means(0, t) - kZ975 * sd;
          upper(0, t) = ks.means(0, t) + kZ975 * sd;
          if (t >= 1 && lower(0, t) <= truth_v.state(t)(0) &&
              truth_v.state(t)(0) <= upper(0, t)) {
            cover(0) += 1.0;
          }
        }
        entry.rmse = rmse(StateSequence(ks.means), truth_v);
        entry.rmse_gaps = gaps_v.empty()
                              ? std::nullopt
                              : std::optional<double>(rmse(
                                    StateSequence(ks.means), truth_v, gaps_v));
        entry.coverage95 = cover(0) / horizon;
        entry.trace = init.em.trace;
        fill_series(entry, ks.means, lower, upper);
        entry.ok = true;
      } catch (const NumericError& e) {
        entry.error = e.what();
      }
    }
    if (!init.em.smoothing_means.size()) {
      for (std::size_t ti = 0; ti < tags.size(); ++ti) {
        ImputationEntry& entry = entries[ri * per_rep + 1 + ti];
        entry.replication = rep;
        entry.algorithm = tags[ti];
        entry.error = "initialization failed";
      }
      return;
    }

    for (std::size_t ti = 0; ti < tags.size(); ++ti) {
      ImputationEntry& entry = entries[ri * per_rep + 1 + ti];
      entry.replication = rep;
      entry.algorithm = tags[ti];
      const TagTraits traits = tag_traits(tags[ti]);
      const RandomStream alg_rng = rep_rng.lane(
          rng_lane::kAlgorithm,
          static_cast<uint64_t>(algorithm_index(tags[ti]) + 1));
      try {
        NpSemConfig ncfg = cfg.npsem;
        ncfg.smoother = traits.smoother;
        ncfg.catalog_update = traits.variant == 0;

        Catalog catalog = [&] {
          switch (traits.variant) {
            case 0:
              return catalog_from_states(init.conditioning0, z_l);
            case 1:
              return catalog_from_observations(y_l, z_l);
            default:
              return catalog_from_states(truth_l, z_l);
          }
        }();
        auto m0 = build_surrogate(std::move(catalog), ncfg.llr,
                                  alg_rng.lane(rng_lane::kCrossValidation));
        RandomStream loop_rng = alg_rng;
        SemResult fit =
            traits.variant == 0
                ? npsem(init.theta0, m0, init.conditioning0, y_l, z_l, initial,
                        obs_op, ncfg, loop_rng)
                : sem(m0, init.theta0, init.conditioning0, y_l, z_l, initial,
                      obs_op, ncfg, loop_rng);
        entry.trace = fit.trace;
        if (fit.error) {
          entry.error = "iteration " +
                        std::to_string(fit.trace.iterations() + 1) + ": " +
                        *fit.error;
          continue;
        }
        RandomStream vrng = alg_rng.lane(rng_lane::kValidation);
        const ValidationScore score = reconstruct_validation(
            fit, y_v, z_v, truth_v, initial, obs_op, traits.smoother,
            ncfg.smoother_cfg, cfg.rmse_tail, vrng, gaps_v);
        entry.rmse = score.rmse;
        entry.rmse_gaps = score.rmse_gaps;
        entry.coverage95 = score.coverage95;
        fill_series(entry, score.mean, score.lower, score.upper);
        entry.ok = true;
      } catch (const NumericError& e) {
        entry.error = e.what();
      }
    }
  });
  return entries;
}

void write_report_csv(const std::string& path,
                      const ReconstructionReport& report) {
  CsvWriter w(path,
              {"replication", "algorithm", "status", "rmse", "coverage95",
               "rmse_gaps", "sigma2_Q_final", "sigma2_R_final", "trace",
               "error"});
  std::vector<std::string> row(10);
  for (const AlgorithmScore& e : report.entries) {
    row[0] = std::to_string(e.replication);
    row[1] = e.algorithm;
    row[2] = e.ok ? "ok" : "failed";
    row[3] = e.ok ? format_double(e.rmse) : "";
    row[4] = e.ok ? format_double(e.coverage95) : "";
    row[5] = e.ok && e.rmse_gaps ? format_double(*e.rmse_gaps) : "";
    row[6] = e.ok ? format_double(e.theta_final.sigma2_Q()) : "";
    row[7] = e.ok ? format_double(e.theta_final.sigma2_R()) : "";
    row[8] = "trace_r" + std::to_string(e.replication) + "_" + e.algorithm +
             ".csv";
    row[9] = e.error;
    w.write_row(row);
  }
  w.close();
}

void write_imputation_report_csv(const std::string& path,
                                 const std::vector<ImputationEntry>& entries) {
  CsvWriter w(path, {"replication", "algorithm", "status", "rmse", "rmse_gaps",
                     "coverage95", "error"});
  std::vector<std::string> row(7);
  for (const ImputationEntry& e : entries) {
    row[0] = std::to_string(e.replication);
    row[1] = e.algorithm;
    row[2] = e.ok ? "ok" : "failed";
    row[3] = e.ok ? format_double(e.rmse) : "";
    row[4] = e.ok && e.rmse_gaps ? format_double(*e.rmse_gaps) : "";
    row[5] = e.ok ? format_double(e.coverage95) : "";
    row[6] = e.error;
    w.write_row(row);
  }
  w.close();
}

void write_imputed_series_csv(const std::string& path,
                              const ImputationEntry& entry) {
  CsvWriter w(path, {"i_time", "truth_hs", "obs_hs", "mean_hs", "lower_95",
                     "upper_95", "is_gap"});
  std::vector<std::string> row(7);
  std::vector<bool> gap(static_cast<size_t>(entry.mean.size()) + 1, false);
  for (int t : entry.gap_times) gap[static_cast<size_t>(t)] = true;
  for (int t = 1; t <= entry.mean.size(); ++t) {
    row[0] = std::to_string(t);
    row[1] = format_double(entry.truth_raw(t - 1));
    row[2] = std::isnan(entry.obs_raw(t - 1))
                 ? std::string()
                 : format_double(entry.obs_raw(t - 1));
    row[3] = format_double(entry.mean(t - 1));
    row[4] = format_double(entry.lower(t - 1));
    row[5] = format_double(entry.upper(t - 1));
    row[6] = gap[static_cast<size_t>(t)] ? "1" : "0";
    w.write_row(row);
  }
  w.close();
}

}  // namespace npsem
