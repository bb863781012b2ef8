#include "npsem/enks.hpp"

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npsem/dynamics.hpp"
#include "npsem/errors.hpp"
#include "npsem/gaussian.hpp"

namespace npsem {

namespace {

/// Column-wise mean of an ensemble block.
Eigen::VectorXd ens_mean(const Eigen::MatrixXd& m) {
  return m.rowwise().mean();
}

}  // namespace

SmoothingEnsemble enks(const SsmSpec& spec, const ObservationSequence& obs,
                       const CovariateSequence& covariates,
                       const SmootherConfig& cfg, RandomStream& rng) {
  spec.validate();
  cfg.validate();
  const int n = cfg.n_ens;
  const int d = spec.state_dim();
  const int horizon = obs.horizon();
  const Eigen::MatrixXd H = spec.obs_op.matrix();
  const double denom = static_cast<double>(n - 1);

  MvNormal init_dist(spec.initial.cov, /*for_sampling=*/true);
  MvNormal q_dist(spec.theta.Q(), /*for_sampling=*/true);
  MvNormal r_dist(spec.theta.R(), /*for_sampling=*/true);

  std::vector<Eigen::MatrixXd> forecast(static_cast<size_t>(horizon + 1));
  std::vector<Eigen::MatrixXd> analysis(static_cast<size_t>(horizon + 1));

  RandomStream init_rng = rng.lane(rng_lane::kInit);
  analysis[0].resize(d, n);
  for (int i = 0; i < n; ++i) {
    analysis[0].col(i) = init_dist.sample(spec.initial.mean, init_rng);
  }
  forecast[0] = analysis[0];

  const Eigen::MatrixXd no_cov(0, n);
  Eigen::MatrixXd zmat;
  for (int t = 1; t <= horizon; ++t) {
    RandomStream prop_rng = rng.lane(rng_lane::kPropagate, static_cast<uint64_t>(t));
    Eigen::MatrixXd& xf = forecast[static_cast<size_t>(t)];
    xf.resize(d, n);
    if (!covariates.empty()) {
      zmat = covariates.value(t).replicate(1, n);
    }
    spec.dynamics->evaluate(analysis[static_cast<size_t>(t - 1)],
                            covariates.empty() ? no_cov : zmat, t, xf);
    for (int i = 0; i < n; ++i) {
      xf.col(i) += q_dist.sample(Eigen::VectorXd::Zero(d), prop_rng);
    }

    Eigen::MatrixXd& xa = analysis[static_cast<size_t>(t)];
    if (obs.observed(t)) {
      const Eigen::MatrixXd anom =
          xf.colwise() - Eigen::VectorXd(ens_mean(xf));
      const Eigen::MatrixXd pf = (anom * anom.transpose()) / denom;
      const Eigen::MatrixXd S = H * pf * H.transpose() + spec.theta.R();
      if (S.isZero(0.0)) {
        xa = xf;  // fully degenerate ensemble + noiseless obs: no update
      } else {
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (S + S.transpose()));
        if (llt.info() != Eigen::Success) {
          throw SingularCovariance(
              -1, "enks: innovation covariance factorization failed at t = " +
                      std::to_string(t));
        }
        // K = pf H' S^-1, applied as K v = pf H' (S^-1 v).
        const Eigen::VectorXd y = obs.value(t);
        RandomStream obs_rng =
            rng.lane(rng_lane::kObsPerturb, static_cast<uint64_t>(t));
        xa.resize(d, n);
        for (int i = 0; i < n; ++i) {
          const Eigen::VectorXd y_i = r_dist.sample(y, obs_rng);
          xa.col(i) =
              xf.col(i) +
              pf * (H.transpose() * llt.solve(y_i - H * xf.col(i)));
        }
      }
    } else {
      xa = xf;
    }
  }

  // Backward pass: x^s_T = x^a_T, then
  // x^s_t = x^a_t + J_t (x^s_{t+1} - x^f_{t+1}),
  // J_t = Cov(x^a_t, x^f_{t+1}) (P^f_{t+1})^-1 from ensemble statistics.
  Eigen::MatrixXd smoothed = analysis[static_cast<size_t>(horizon)];
  std::vector<Eigen::MatrixXd> members(static_cast<size_t>(n),
                                       Eigen::MatrixXd(d, horizon + 1));
  for (int i = 0; i < n; ++i) members[static_cast<size_t>(i)].col(horizon) = smoothed.col(i);

  for (int t = horizon - 1; t >= 0; --t) {
    const Eigen::MatrixXd& xa = analysis[static_cast<size_t>(t)];
    const Eigen::MatrixXd& xf1 = forecast[static_cast<size_t>(t + 1)];
    const Eigen::MatrixXd anom_a = xa.colwise() - Eigen::VectorXd(ens_mean(xa));
    const Eigen::MatrixXd anom_f = xf1.colwise() - Eigen::VectorXd(ens_mean(xf1));
    const Eigen::MatrixXd cross = (anom_a * anom_f.transpose()) / denom;
    const Eigen::MatrixXd pf = (anom_f * anom_f.transpose()) / denom;

    Eigen::MatrixXd next = xa;
    if (!pf.isZero(0.0)) {
      Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (pf + pf.transpose()));
      if (llt.info() != Eigen::Success) {
        throw SingularCovariance(
            -1, "enks: forecast covariance factorization failed at t = " +
                    std::to_string(t));
      }
      // J = cross pf^-1, applied as J v = cross (pf^-1 v).
      for (int i = 0; i < n; ++i) {
        next.col(i) += cross * llt.solve(smoothed.col(i) - xf1.col(i));
      }
    }
    smoothed = std::move(next);
    for (int i = 0; i < n; ++i) members[static_cast<size_t>(i)].col(t) = smoothed.col(i);
  }

  SmoothingEnsemble out;
  out.trajectories = std::move(members);
  out.source = EnsembleSource::kEnks;
  out.validate();
  return out;
}

}  // namespace npsem
