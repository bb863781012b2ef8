#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "npsem/sequences.hpp"

namespace npsem {

/// Where a smoothing ensemble came from; recorded in serialized output.
enum class EnsembleSource { kCpfBs, kEnks, kKsGaussianDraw };

std::string to_string(EnsembleSource source);

/// N simulated trajectories approximating the smoothing distribution.
/// Each member is a d x (T+1) matrix (column t holds x_t).
struct SmoothingEnsemble {
  std::vector<Eigen::MatrixXd> trajectories;
  EnsembleSource source = EnsembleSource::kCpfBs;

  int size() const { return static_cast<int>(trajectories.size()); }
  int dim() const {
    return trajectories.empty() ? 0 : static_cast<int>(trajectories[0].rows());
  }
  int horizon() const {
    return trajectories.empty() ? 0
                                : static_cast<int>(trajectories[0].cols()) - 1;
  }
  const Eigen::MatrixXd& member(int i) const {
    return trajectories[static_cast<size_t>(i)];
  }

  /// Per-time average across members, d x (T+1).
  Eigen::MatrixXd mean() const;

  /// Throws std::invalid_argument if empty, ragged, or non-finite.
  void validate() const;
};

/// Monte Carlo sizes of the smoothing engines.
struct SmootherConfig {
  int n_filter = 10;  // CPF particle count (conditioning occupies one slot)
  int n_smooth = 5;   // backward-simulation trajectory count
  int n_ens = 20;     // EnKS member count

  void validate() const;
};

}  // namespace npsem
