#include "npsem/estimators.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "npsem/cpf_bs.hpp"
#include "npsem/enks.hpp"
#include "npsem/errors.hpp"
#include "npsem/gaussian.hpp"
#include "npsem/kalman.hpp"

namespace npsem {

namespace {

constexpr double kVarianceFloor = 1e-10;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void floor_diagonal(Eigen::MatrixXd& cov) {
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (cov(i, i) < kVarianceFloor) cov(i, i) = kVarianceFloor;
  }
}

/// Residual sufficient statistics of one smoothing ensemble.
struct MomentStats {
  Eigen::MatrixXd q_sum;  // sum of transition residual outer products
  Eigen::MatrixXd r_sum;  // sum of observation residual outer products
  double x0_sum = 0.0;    // sum over members of log p(x_0^{(i)})
  long n_members = 0;
  long n_trans = 0;
  long n_obs = 0;
};

MomentStats stats_from_ensemble(const SmoothingEnsemble& ensemble,
                                const ObservationSequence& y,
                                const CovariateSequence& z,
                                const DynamicalModel& dynamics,
                                const ObservationOperator& obs_op,
                                const GaussianSpec* initial) {
  ensemble.validate();
  const int horizon = ensemble.horizon();
  if (horizon != y.horizon()) {
    throw std::invalid_argument("ensemble/observation horizon mismatch");
  }
  const int d = ensemble.dim();
  const int d_obs = y.dim();

  MomentStats st;
  st.q_sum = Eigen::MatrixXd::Zero(d, d);
  st.r_sum = Eigen::MatrixXd::Zero(d_obs, d_obs);
  st.n_members = ensemble.size();
  st.n_trans = static_cast<long>(ensemble.size()) * horizon;
  st.n_obs = static_cast<long>(ensemble.size()) * y.observed_count();

  std::optional<MvNormal> init_dens;
  if (initial) init_dens.emplace(initial->cov);

  for (int i = 0; i < ensemble.size(); ++i) {
    const Eigen::MatrixXd& traj = ensemble.member(i);
    const Eigen::MatrixXd fc = dynamics.forecast_trajectory(traj, z);
    for (int t = 1; t <= horizon; ++t) {
      const Eigen::VectorXd resid = traj.col(t) - fc.col(t - 1);
      st.q_sum.noalias() += resid * resid.transpose();
      if (y.observed(t)) {
        const Eigen::VectorXd r = y.value(t) - obs_op.apply(traj.col(t));
        st.r_sum.noalias() += r * r.transpose();
      }
    }
    if (initial) {
      st.x0_sum += init_dens->logpdf_residual(traj.col(0) - initial->mean);
    }
  }
  return st;
}

MomentStats stats_from_particles(const ParticleSystem& ps,
                                 const Eigen::MatrixXi& idx,
                                 const ObservationSequence& y,
                                 const ObservationOperator& obs_op,
                                 const GaussianSpec& initial) {
  const int n_s = static_cast<int>(idx.rows());
  const int horizon = ps.horizon();
  const int d = ps.dim();
  const int d_obs = y.dim();

  MomentStats st;
  st.q_sum = Eigen::MatrixXd::Zero(d, d);
  st.r_sum = Eigen::MatrixXd::Zero(d_obs, d_obs);
  st.n_members = n_s;
  st.n_trans = static_cast<long>(n_s) * horizon;
  st.n_obs = static_cast<long>(n_s) * y.observed_count();

  MvNormal init_dens(initial.cov);
  for (int s = 0; s < n_s; ++s) {
    st.x0_sum += init_dens.logpdf_residual(ps.particles[0].col(idx(s, 0)) -
                                           initial.mean);
    for (int t = 1; t <= horizon; ++t) {
      const Eigen::VectorXd xt =
          ps.particles[static_cast<size_t>(t)].col(idx(s, t));
      const Eigen::VectorXd resid =
          xt - ps.forecasts[static_cast<size_t>(t - 1)].col(idx(s, t - 1));
      st.q_sum.noalias() += resid * resid.transpose();
      if (y.observed(t)) {
        const Eigen::VectorXd r = y.value(t) - obs_op.apply(xt);
        st.r_sum.noalias() += r * r.transpose();
      }
    }
  }
  return st;
}

Theta theta_from_stats(const MomentStats& st, NoiseParameterization param) {
  if (st.n_obs == 0) {
    throw NoObservations("m_step: no observed time steps; R is not estimable");
  }
  Eigen::MatrixXd Q =
      Theta::project(st.q_sum / static_cast<double>(st.n_trans), param);
  Eigen::MatrixXd R =
      Theta::project(st.r_sum / static_cast<double>(st.n_obs), param);
  floor_diagonal(Q);
  floor_diagonal(R);
  return Theta(std::move(Q), std::move(R), param);
}

/// sum over n_terms residuals r of log N(r; 0, cov), given sum of r r^T.
double gaussian_sum_term(long n_terms, const Eigen::MatrixXd& outer_sum,
                         const Eigen::MatrixXd& cov) {
  if (n_terms == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance(-1, "intermediate function: covariance not PD");
  }
  double logdet = 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  const double dim = static_cast<double>(cov.rows());
  return -0.5 * static_cast<double>(n_terms) *
             (dim * std::log(2.0 * M_PI) + logdet) -
         0.5 * llt.solve(outer_sum).trace();
}

double i_hat_from_stats(const MomentStats& st, const Theta& theta) {
  const double total = st.x0_sum +
                       gaussian_sum_term(st.n_trans, st.q_sum, theta.Q()) +
                       gaussian_sum_term(st.n_obs, st.r_sum, theta.R());
  return total / static_cast<double>(st.n_members);
}

}  // namespace

std::string to_string(SmootherKind kind) {
  return kind == SmootherKind::kCpfBs ? "cpf-bs" : "enks";
}

void NpSemConfig::validate() const {
  if (iterations < 1) {
    throw std::invalid_argument("NpSemConfig: iterations must be >= 1");
  }
  if (cv_every < 1) {
    throw std::invalid_argument("NpSemConfig: cv_every must be >= 1");
  }
  smoother_cfg.validate();
}

double complete_loglik(const StateSequence& x, const ObservationSequence& y,
                       const CovariateSequence& z,
                       const DynamicalModel& dynamics, const Theta& theta,
                       const SsmSpec& spec) {
  const int horizon = x.horizon();
  if (horizon != y.horizon()) {
    throw std::invalid_argument("complete_loglik: x/y horizon mismatch");
  }
  double ll = gaussian_logpdf(x.state(0), spec.initial.mean, spec.initial.cov);
  const Eigen::MatrixXd fc = dynamics.forecast_trajectory(x.values(), z);
  const MvNormal q_dens(theta.Q());
  const MvNormal r_dens(theta.R());
  for (int t = 1; t <= horizon; ++t) {
    ll += q_dens.logpdf_residual(x.state(t) - fc.col(t - 1));
    if (y.observed(t)) {
      ll += r_dens.logpdf_residual(y.value(t) - spec.obs_op.apply(x.state(t)));
    }
  }
  return ll;
}

double intermediate_I_hat(const SmoothingEnsemble& ensemble,
                          const ObservationSequence& y,
                          const CovariateSequence& z,
                          const DynamicalModel& dynamics, const Theta& theta,
                          const SsmSpec& spec) {
  ensemble.validate();
  double total = 0.0;
  for (int i = 0; i < ensemble.size(); ++i) {
    total += complete_loglik(StateSequence(ensemble.member(i)), y, z, dynamics,
                             theta, spec);
  }
  return total / static_cast<double>(ensemble.size());
}

Theta m_step_gaussian(const SmoothingEnsemble& ensemble,
                      const ObservationSequence& y, const CovariateSequence& z,
                      const DynamicalModel& dynamics,
                      const ObservationOperator& obs_op,
                      NoiseParameterization parameterization) {
  const MomentStats st =
      stats_from_ensemble(ensemble, y, z, dynamics, obs_op, nullptr);
  return theta_from_stats(st, parameterization);
}

EmLinearResult em_linear(const SsmSpec& spec, const ObservationSequence& y,
                         const CovariateSequence& z, int iterations,
                         const EmLinearOptions& options) {
  spec.validate();
  if (iterations < 0) {
    throw std::invalid_argument("em_linear: iterations must be >= 0");
  }
  const auto* affine0 = dynamic_cast<const AffineModel*>(spec.dynamics.get());
  if (!affine0) {
    throw std::invalid_argument("em_linear: dynamics must be affine");
  }

  const int d = spec.state_dim();
  const int horizon = y.horizon();
  const Eigen::MatrixXd H = spec.obs_op.matrix();
  const NoiseParameterization param = spec.theta.parameterization();

  EmLinearResult out;
  out.params = affine0->params();
  out.theta = spec.theta;
  out.trace.records.push_back(
      {0, out.theta, 0.0, std::nullopt, std::nullopt, 0.0});

  for (int r = 1; r <= iterations + 1; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const SsmSpec current{std::make_shared<AffineModel>(out.params),
                          spec.obs_op, out.theta, spec.initial};
    const KalmanResult ks = kalman_smoother(current, y, z);
    out.trace.records[static_cast<size_t>(r - 1)].loglik_proxy = ks.loglik;
    if (r == iterations + 1) {
      out.smoothing_means = ks.means;
      out.smoothing_covs = ks.covs;
      out.loglik = ks.loglik;
      break;
    }

    // Smoothing moments of (x_{t-1}, x_t) pairs, t = 1..T.
    Eigen::MatrixXd sxx = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd syx = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd syy = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd sx = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sy = Eigen::VectorXd::Zero(d);
    for (int t = 1; t <= horizon; ++t) {
      const Eigen::VectorXd mp = ks.means.col(t - 1);
      const Eigen::VectorXd mc = ks.means.col(t);
      sxx.noalias() += ks.covs[static_cast<size_t>(t - 1)] + mp * mp.transpose();
      syx.noalias() += ks.lag1[static_cast<size_t>(t - 1)] + mc * mp.transpose();
      syy.noalias() += ks.covs[static_cast<size_t>(t)] + mc * mc.transpose();
      sx += mp;
      sy += mc;
    }
    Eigen::MatrixXd G(d + 1, d + 1);
    G.topLeftCorner(d, d) = sxx;
    G.topRightCorner(d, 1) = sx;
    G.bottomLeftCorner(1, d) = sx.transpose();
    G(d, d) = static_cast<double>(horizon);
    Eigen::MatrixXd M(d, d + 1);
    M.leftCols(d) = syx;
    M.col(d) = sy;

    Eigen::MatrixXd A(d, d + 1);
    if (options.estimate_dynamics) {
      A = G.ldlt().solve(M.transpose()).transpose();
      out.params.alpha = A.leftCols(d);
      out.params.beta = A.col(d);
    } else {
      A.leftCols(d) = out.params.alpha;
      A.col(d) = out.params.beta;
    }

    Eigen::MatrixXd Q = out.theta.Q();
    if (options.estimate_Q) {
      Q = (syy - A * M.transpose() - M * A.transpose() +
           A * G * A.transpose()) /
          static_cast<double>(horizon);
      Q = Theta::project(0.5 * (Q + Q.transpose()), param);
      floor_diagonal(Q);
    }
    Eigen::MatrixXd R = out.theta.R();
    if (options.estimate_R) {
      const int n_obs = y.observed_count();
      if (n_obs == 0) {
        throw NoObservations("em_linear: no observed time steps");
      }
      Eigen::MatrixXd racc =
          Eigen::MatrixXd::Zero(y.dim(), y.dim());
      for (int t = 1; t <= horizon; ++t) {
        if (!y.observed(t)) continue;
        const Eigen::VectorXd yt = y.value(t);
        const Eigen::VectorXd hm = H * ks.means.col(t);
        racc.noalias() += yt * yt.transpose() - hm * yt.transpose() -
                          yt * hm.transpose() +
                          H *
                              (ks.covs[static_cast<size_t>(t)] +
                               ks.means.col(t) * ks.means.col(t).transpose()) *
                              H.transpose();
      }
      R = Theta::project(0.5 * (racc + racc.transpose()) / n_obs, param);
      floor_diagonal(R);
    }
    out.theta = Theta(std::move(Q), std::move(R), param);
    out.trace.records.push_back({r, out.theta, 0.0, std::nullopt, std::nullopt,
                                 seconds_since(start)});
  }
  return out;
}

namespace {

std::optional<int> surrogate_k(const DynamicalModel* dynamics) {
  if (const auto* s = dynamic_cast<const LlrSurrogate*>(dynamics)) {
    return s->config().k;
  }
  return std::nullopt;
}

SmoothingEnsemble materialize(const ParticleSystem& ps,
                              const Eigen::MatrixXi& idx) {
  SmoothingEnsemble e;
  e.source = EnsembleSource::kCpfBs;
  e.trajectories.reserve(static_cast<size_t>(idx.rows()));
  for (int s = 0; s < idx.rows(); ++s) {
    e.trajectories.push_back(extract_trajectory(ps, idx.row(s).transpose()));
  }
  return e;
}

SemResult run_sem_loop(std::shared_ptr<const DynamicalModel> dynamics0,
                       bool catalog_update, const Theta& theta0,
                       const StateSequence& conditioning0,
                       const ObservationSequence& y,
                       const CovariateSequence& z, const GaussianSpec& initial,
                       const ObservationOperator& obs_op,
                       const NpSemConfig& cfg, RandomStream& rng) {
  cfg.validate();
  if (!dynamics0) throw std::invalid_argument("estimation: null dynamics");

  SemResult res;
  std::shared_ptr<const DynamicalModel> dynamics = std::move(dynamics0);
  Theta theta = theta0;
  StateSequence conditioning = conditioning0;
  const NoiseParameterization param = theta0.parameterization();
  std::optional<int> current_k = surrogate_k(dynamics.get());

  {
    const SsmSpec spec{dynamics, obs_op, theta, initial};
    const double i0 =
        complete_loglik(conditioning, y, z, *dynamics, theta, spec);
    res.trace.records.push_back(
        {0, theta, i0, current_k, std::nullopt, 0.0});
    res.dynamics_by_record.push_back(dynamics);
  }

  try {
    for (int r = 1; r <= cfg.iterations; ++r) {
      const auto start = std::chrono::steady_clock::now();
      RandomStream iter_rng =
          rng.lane(rng_lane::kIteration, static_cast<uint64_t>(r));
      const SsmSpec spec{dynamics, obs_op, theta, initial};

      SmoothingEnsemble ensemble;
      MomentStats stats;
      if (cfg.smoother == SmootherKind::kCpfBs) {
        const ParticleSystem ps =
            cpf(spec, y, z, conditioning, cfg.smoother_cfg, iter_rng);
        const Eigen::MatrixXi idx = backward_simulation_indices(
            ps, theta, cfg.smoother_cfg.n_smooth, iter_rng);
        stats = stats_from_particles(ps, idx, y, obs_op, initial);
        ensemble = materialize(ps, idx);
      } else {
        ensemble = enks(spec, y, z, cfg.smoother_cfg, iter_rng);
        stats = stats_from_ensemble(ensemble, y, z, *dynamics, obs_op,
                                    &initial);
      }

      theta = theta_from_stats(stats, param);
      const double i_hat = i_hat_from_stats(stats, theta);

      if (cfg.smoother == SmootherKind::kCpfBs) {
        RandomStream cond_rng = iter_rng.lane(rng_lane::kConditioning);
        const int j = static_cast<int>(
            cond_rng.uniform_index(static_cast<uint64_t>(ensemble.size())));
        if (j != 0) {
          std::swap(ensemble.trajectories[0],
                    ensemble.trajectories[static_cast<size_t>(j)]);
        }
        conditioning = StateSequence(ensemble.member(0));
      }

      std::optional<int> catalog_id;
      if (catalog_update) {
        auto catalog =
            std::make_shared<const Catalog>(build_catalog(ensemble, z));
        LlrConfig llr_cfg = cfg.llr;
        if (!current_k || (r - 1) % cfg.cv_every == 0) {
          RandomStream cv_rng = iter_rng.lane(rng_lane::kCrossValidation);
          current_k = cross_validate_k(*catalog, llr_cfg, cv_rng);
        }
        llr_cfg.k = *current_k;
        dynamics = std::make_shared<LlrSurrogate>(std::move(catalog),
                                                  std::move(llr_cfg));
        catalog_id = r;
      }

      res.trace.records.push_back({r, theta, i_hat, current_k, catalog_id,
                                   seconds_since(start)});
      res.dynamics_by_record.push_back(dynamics);
      res.last_ensemble = std::move(ensemble);
    }
  } catch (const NumericError& e) {
    res.error = e.what();
  }
  res.final_conditioning = std::move(conditioning);
  res.final_dynamics = std::move(dynamics);
  return res;
}

}  // namespace

SemResult sem(std::shared_ptr<const DynamicalModel> dynamics,
              const Theta& theta0, const StateSequence& conditioning0,
              const ObservationSequence& y, const CovariateSequence& z,
              const GaussianSpec& initial, const ObservationOperator& obs_op,
              const NpSemConfig& cfg, RandomStream& rng) {
  if (cfg.catalog_update) {
    throw std::invalid_argument("sem: catalog updates require npsem");
  }
  return run_sem_loop(std::move(dynamics), false, theta0, conditioning0, y, z,
                      initial, obs_op, cfg, rng);
}

SemResult npsem(const Theta& theta0, std::shared_ptr<const LlrSurrogate> m0,
                const StateSequence& conditioning0,
                const ObservationSequence& y, const CovariateSequence& z,
                const GaussianSpec& initial, const ObservationOperator& obs_op,
                const NpSemConfig& cfg, RandomStream& rng) {
  if (!m0) throw std::invalid_argument("npsem: null initial surrogate");
  return run_sem_loop(std::move(m0), cfg.catalog_update, theta0, conditioning0,
                      y, z, initial, obs_op, cfg, rng);
}

Theta tail_average_theta(const EstimationTrace& trace, int tail) {
  if (trace.records.empty()) {
    throw std::invalid_argument("tail_average_theta: empty trace");
  }
  const int n = static_cast<int>(trace.records.size());
  const int use = std::min(std::max(tail, 1), n);
  const Theta& last = trace.records.back().theta;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(last.state_dim(), last.state_dim());
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(last.obs_dim(), last.obs_dim());
  for (int i = n - use; i < n; ++i) {
    Q += trace.records[static_cast<size_t>(i)].theta.Q();
    R += trace.records[static_cast<size_t>(i)].theta.R();
  }
  Q /= static_cast<double>(use);
  R /= static_cast<double>(use);
  return Theta(std::move(Q), std::move(R), last.parameterization());
}

}  // namespace npsem
