#pragma once

#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/smoothing.hpp"
#include "npsem/theta.hpp"

namespace npsem {

/// Ensemble Kalman smoother: stochastic (perturbed-observation) EnKF forward
/// pass followed by an all-lag backward recursion on ensemble statistics.
/// Masked observations skip the analysis step. Returns cfg.n_ens member
/// trajectories.
SmoothingEnsemble enks(const SsmSpec& spec, const ObservationSequence& obs,
                       const CovariateSequence& covariates,
                       const SmootherConfig& cfg, RandomStream& rng);

}  // namespace npsem
