#pragma once

#include <Eigen/Dense>

#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/theta.hpp"

namespace npsem {

struct SimulatedData {
  StateSequence states;        // x_0..x_T
  ObservationSequence obs;     // y_1..y_T
};

// Draws (x_{0:T}, y_{1:T}) from the generative model
//   x_t = m(x_{t-1}, z_t) + eta_t,   eta_t ~ N(0, Q)
//   y_t = H x_t + eps_t,             eps_t ~ N(0, R)
// Covariates may be empty; otherwise they must cover times 1..T.
// Observation times listed in `missing_times` (1-based) are masked out.
SimulatedData simulate_ssm(const SsmSpec& spec, int horizon,
                           const CovariateSequence& covariates,
                           RandomStream& rng,
                           const std::vector<int>& missing_times = {});

}  // namespace npsem
