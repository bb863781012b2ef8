#include "npsem/cpf_bs.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "npsem/dynamics.hpp"
#include "npsem/errors.hpp"
#include "npsem/gaussian.hpp"

namespace npsem {

namespace {

/// Normalize a log-weight vector in place to linear probabilities.
/// Throws WeightCollapse(t) when no weight is representable.
void normalize_log_weights(Eigen::Ref<Eigen::VectorXd> logw, int t) {
  const double maxv = logw.maxCoeff();
  if (!std::isfinite(maxv)) {
    throw WeightCollapse(t, "particle weights vanished at t = " +
                                std::to_string(t));
  }
  logw = (logw.array() - maxv).exp();
  const double s = logw.sum();
  logw /= s;
}

}  // namespace

ParticleSystem cpf(const SsmSpec& spec, const ObservationSequence& obs,
                   const CovariateSequence& covariates,
                   const StateSequence& conditioning, const SmootherConfig& cfg,
                   RandomStream& rng) {
  spec.validate();
  cfg.validate();
  const int n = cfg.n_filter;
  const int d = spec.state_dim();
  const int horizon = obs.horizon();
  if (conditioning.horizon() != horizon || conditioning.dim() != d) {
    throw std::invalid_argument("cpf: conditioning sequence shape mismatch");
  }

  MvNormal init_dist(spec.initial.cov, /*for_sampling=*/true);
  MvNormal q_dist(spec.theta.Q(), /*for_sampling=*/true);
  MvNormal r_dens(spec.theta.R());

  ParticleSystem ps;
  ps.particles.assign(static_cast<size_t>(horizon + 1), Eigen::MatrixXd(d, n));
  ps.forecasts.assign(static_cast<size_t>(horizon), Eigen::MatrixXd(d, n));
  ps.weights.resize(n, horizon + 1);
  ps.ancestors.resize(n, horizon);
  ps.conditioning = conditioning;

  RandomStream init_rng = rng.lane(rng_lane::kInit);
  for (int i = 0; i < n - 1; ++i) {
    ps.particles[0].col(i) = init_dist.sample(spec.initial.mean, init_rng);
  }
  ps.particles[0].col(n - 1) = conditioning.state(0);
  ps.weights.col(0).setConstant(1.0 / static_cast<double>(n));

  const Eigen::MatrixXd no_cov(0, n);
  Eigen::MatrixXd zmat;
  Eigen::VectorXd logw(n);
  for (int t = 1; t <= horizon; ++t) {
    Eigen::MatrixXd& forecast = ps.forecasts[static_cast<size_t>(t - 1)];
    if (!covariates.empty()) zmat = covariates.value(t).replicate(1, n);
    spec.dynamics->evaluate(ps.particles[static_cast<size_t>(t - 1)],
                            covariates.empty() ? no_cov : zmat, t, forecast);

    RandomStream res_rng = rng.lane(rng_lane::kResample, static_cast<uint64_t>(t));
    RandomStream prop_rng =
        rng.lane(rng_lane::kPropagate, static_cast<uint64_t>(t));
    const std::span<const double> prev_w(
        ps.weights.col(t - 1).data(), static_cast<size_t>(n));

    Eigen::MatrixXd& x = ps.particles[static_cast<size_t>(t)];
    for (int i = 0; i < n - 1; ++i) {
      const int a = res_rng.categorical(prev_w);
      ps.ancestors(i, t - 1) = a;
      x.col(i) = forecast.col(a) +
                 q_dist.sample(Eigen::VectorXd::Zero(d), prop_rng);
    }
    ps.ancestors(n - 1, t - 1) = n - 1;
    x.col(n - 1) = conditioning.state(t);

    if (obs.observed(t)) {
      const Eigen::VectorXd y = obs.value(t);
      for (int i = 0; i < n; ++i) {
        logw[i] = r_dens.logpdf_residual(y - spec.obs_op.apply(x.col(i)));
      }
      normalize_log_weights(logw, t);
      ps.weights.col(t) = logw;
    } else {
      ps.weights.col(t).setConstant(1.0 / static_cast<double>(n));
    }
  }
  return ps;
}

Eigen::MatrixXi backward_simulation_indices(const ParticleSystem& ps,
                                            const Theta& theta, int n_smooth,
                                            RandomStream& rng) {
  if (n_smooth < 1) {
    throw std::invalid_argument("backward_simulation: n_smooth must be >= 1");
  }
  const int n = ps.n_filter();
  const int horizon = ps.horizon();
  MvNormal q_dens(theta.Q());

  Eigen::MatrixXi idx(n_smooth, horizon + 1);
  Eigen::VectorXd logw(n);
  for (int s = 0; s < n_smooth; ++s) {
    RandomStream draw_rng =
        rng.lane(rng_lane::kBackward, static_cast<uint64_t>(s));
    idx(s, horizon) = draw_rng.categorical(std::span<const double>(
        ps.weights.col(horizon).data(), static_cast<size_t>(n)));
    for (int t = horizon - 1; t >= 0; --t) {
      const Eigen::VectorXd next =
          ps.particles[static_cast<size_t>(t + 1)].col(idx(s, t + 1));
      const Eigen::MatrixXd& forecast = ps.forecasts[static_cast<size_t>(t)];
      for (int i = 0; i < n; ++i) {
        const double w = ps.weights(i, t);
        logw[i] = (w > 0.0 ? std::log(w)
                           : -std::numeric_limits<double>::infinity()) +
                  q_dens.logpdf_residual(next - forecast.col(i));
      }
      normalize_log_weights(logw, t);
      idx(s, t) = draw_rng.categorical(
          std::span<const double>(logw.data(), static_cast<size_t>(n)));
    }
  }
  return idx;
}

Eigen::MatrixXd extract_trajectory(
    const ParticleSystem& ps, const Eigen::Ref<const Eigen::VectorXi>& lanes) {
  const int horizon = ps.horizon();
  Eigen::MatrixXd traj(ps.dim(), horizon + 1);
  for (int t = 0; t <= horizon; ++t) {
    traj.col(t) = ps.particles[static_cast<size_t>(t)].col(lanes[t]);
  }
  return traj;
}

SmoothingEnsemble backward_simulation(const ParticleSystem& ps,
                                      const Theta& theta, int n_smooth,
                                      RandomStream& rng) {
  const Eigen::MatrixXi idx =
      backward_simulation_indices(ps, theta, n_smooth, rng);
  SmoothingEnsemble out;
  out.source = EnsembleSource::kCpfBs;
  out.trajectories.reserve(static_cast<size_t>(n_smooth));
  for (int s = 0; s < n_smooth; ++s) {
    out.trajectories.push_back(extract_trajectory(ps, idx.row(s).transpose()));
  }
  return out;
}

StateSequence update_conditioning(const SmoothingEnsemble& ensemble,
                                  RandomStream& rng) {
  ensemble.validate();
  const int j = static_cast<int>(
      rng.uniform_index(static_cast<uint64_t>(ensemble.size())));
  return StateSequence(ensemble.member(j));
}

}  // namespace npsem
