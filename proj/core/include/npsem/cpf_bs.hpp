#pragma once

#include <vector>

#include <Eigen/Core>

#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/smoothing.hpp"
#include "npsem/theta.hpp"

namespace npsem {

/// Output of one conditional-particle-filter sweep. Particle indices are
/// 0-based; the conditioning trajectory occupies the last lane (n_filter-1)
/// at every time step.
struct ParticleSystem {
  std::vector<Eigen::MatrixXd> particles;  // T+1 entries of d x N_f
  Eigen::MatrixXd weights;                 // N_f x (T+1), each column sums to 1
  Eigen::MatrixXi ancestors;               // N_f x T; column t-1 holds I_t
  /// Forecast cache: entry t (t = 0..T-1) holds m(x_t^{(i)}, z_{t+1}) for
  /// all lanes i — reused by propagation and by the backward pass.
  std::vector<Eigen::MatrixXd> forecasts;
  StateSequence conditioning;

  int n_filter() const {
    return particles.empty() ? 0 : static_cast<int>(particles[0].cols());
  }
  int dim() const {
    return particles.empty() ? 0 : static_cast<int>(particles[0].rows());
  }
  int horizon() const { return static_cast<int>(particles.size()) - 1; }
};

/// Conditional particle filter: multinomial resampling, Gaussian propagation
/// x_t ~ N(m(x_{t-1}, z_t), Q), conditioning lane pinned to `conditioning`
/// with its ancestor forced. Masked observations give uniform weights.
/// Throws WeightCollapse(t) when every weight vanishes at some step.
ParticleSystem cpf(const SsmSpec& spec, const ObservationSequence& obs,
                   const CovariateSequence& covariates,
                   const StateSequence& conditioning, const SmootherConfig& cfg,
                   RandomStream& rng);

/// Backward simulation: draws n_smooth trajectories; at each backward step
/// the smoothing weights are w_t^{(i)} · N(x_{t+1}; m(x_t^{(i)}, z_{t+1}), Q)
/// computed in log-space from the forecast cache. Returns the lane index
/// path of each draw (n_smooth x (T+1)).
Eigen::MatrixXi backward_simulation_indices(const ParticleSystem& ps,
                                            const Theta& theta, int n_smooth,
                                            RandomStream& rng);

/// Materialized backward-simulation trajectories.
SmoothingEnsemble backward_simulation(const ParticleSystem& ps,
                                      const Theta& theta, int n_smooth,
                                      RandomStream& rng);

/// One trajectory of the ensemble, chosen uniformly at random — the next
/// sweep's conditioning sequence.
StateSequence update_conditioning(const SmoothingEnsemble& ensemble,
                                  RandomStream& rng);

/// Materialize the trajectory following lane indices through the system.
Eigen::MatrixXd extract_trajectory(const ParticleSystem& ps,
                                   const Eigen::Ref<const Eigen::VectorXi>& lanes);

}  // namespace npsem
