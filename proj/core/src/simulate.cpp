#include "npsem/simulate.hpp"

#include <stdexcept>

#include "npsem/dynamics.hpp"
#include "npsem/errors.hpp"
#include "npsem/gaussian.hpp"

namespace npsem {

SimulatedData simulate_ssm(const SsmSpec& spec, int horizon,
                           const CovariateSequence& covariates,
                           RandomStream& rng,
                           const std::vector<int>& missing_times) {
  spec.validate();
  if (horizon < 2) {
    throw std::invalid_argument("simulate_ssm: horizon must be at least 2");
  }
  if (!covariates.empty() && covariates.horizon() < horizon) {
    throw std::invalid_argument("simulate_ssm: covariates shorter than horizon");
  }
  const int d = spec.dynamics->state_dim();
  const int d_obs = spec.obs_op.obs_dim();

  MvNormal init_dist(spec.initial.cov, /*for_sampling=*/true);
  MvNormal q_dist(spec.theta.Q(), /*for_sampling=*/true);
  MvNormal r_dist(spec.theta.R(), /*for_sampling=*/true);

  Eigen::MatrixXd x(d, horizon + 1);
  Eigen::MatrixXd y(d_obs, horizon);

  RandomStream init_rng = rng.lane(rng_lane::kInit);
  x.col(0) = init_dist.sample(spec.initial.mean, init_rng);

  const Eigen::VectorXd no_cov(0);
  for (int t = 1; t <= horizon; ++t) {
    const Eigen::VectorXd z =
        covariates.empty() ? no_cov : Eigen::VectorXd(covariates.value(t));
    RandomStream state_rng = rng.lane(rng_lane::kPropagate, static_cast<uint64_t>(t));
    RandomStream obs_rng = rng.lane(rng_lane::kObsPerturb, static_cast<uint64_t>(t));
    const Eigen::VectorXd mean = spec.dynamics->evaluate_one(x.col(t - 1), z, t);
    x.col(t) = q_dist.sample(mean, state_rng);
    y.col(t - 1) = r_dist.sample(spec.obs_op.apply(x.col(t)), obs_rng);
  }

  std::vector<std::uint8_t> mask(static_cast<size_t>(horizon), 1);
  for (int t : missing_times) {
    if (t < 1 || t > horizon) {
      throw std::invalid_argument("simulate_ssm: missing time out of range");
    }
    mask[static_cast<size_t>(t - 1)] = 0;
  }

  return SimulatedData{StateSequence(std::move(x)),
                       ObservationSequence(std::move(y), std::move(mask))};
}

}  // namespace npsem
