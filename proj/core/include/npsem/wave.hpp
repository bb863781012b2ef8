#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "npsem/random.hpp"

namespace npsem {

/// One significant-wave-height record series with its covariates: water
/// depth, wind speed and offshore wave height (rows of `covariates`, in that
/// order). hs may contain NaN where the truth is unknown; covariates must be
/// complete before imputation runs.
struct WaveSeries {
  std::vector<std::string> timestamps;  // optional; empty or one per step
  Eigen::VectorXd hs;                   // raw scale (m)
  Eigen::MatrixXd covariates;           // 3 x T: depth, wind, hs_off

  int length() const { return static_cast<int>(hs.size()); }
};

/// Reads `timestamp,hs,depth,wind,hs_off` rows (header mandatory). Empty
/// numeric fields become NaN.
WaveSeries load_wave_csv(const std::string& path);
void write_wave_csv(const std::string& path, const WaveSeries& series);

/// Next-step map of the synthetic generator on the log scale: an
/// autoregression pulled toward a response to the offshore sea state whose
/// strength is modulated by the tide level, plus a weak wind term.
double wave_transition(double log_hs, const Eigen::Vector3d& z);

/// Process-noise variance the generator injects on the log scale.
inline constexpr double kWaveProcessVariance = 0.01;

/// Synthetic hourly series with the qualitative structure of coastal wave
/// records: deterministic tidal cycle (random phase per series),
/// autoregressive wind and offshore sea state, latent log-Hs driven by
/// wave_transition.
WaveSeries synthesize_wave(int horizon, RandomStream& rng);

/// 1-based start times of n non-overlapping contiguous gap blocks of the
/// given length, placed uniformly in [1, horizon]; sorted ascending.
std::vector<int> sample_gap_starts(int horizon, int gap_length, int n_gaps,
                                   RandomStream& rng);

/// Expands block starts into the sorted list of every gapped time.
std::vector<int> expand_gaps(const std::vector<int>& starts, int gap_length,
                             int horizon);

}  // namespace npsem
