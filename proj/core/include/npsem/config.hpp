#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "npsem/estimators.hpp"
#include "npsem/theta.hpp"

namespace npsem {

/// The eight comparison variants, in canonical (reporting) order.
inline constexpr std::array<const char*, 8> kAlgorithmTags = {
    "cpf-bs-update", "cpf-bs-no-update", "cpf-bs-perfect", "cpf-bs-true-m",
    "enks-update",   "enks-no-update",   "enks-perfect",   "enks-true-m"};

/// Canonical position of a tag in kAlgorithmTags, -1 when unknown.
int algorithm_index(const std::string& tag);

/// Options for the covariate-driven imputation case ("csv-data" model):
/// data source, observation-noise level and gap layout.
struct WaveOptions {
  std::string data_path;  // empty: use the synthetic generator
  double noise_sd = 0.2;  // sqrt(R) added to the log-scale target
  int gap_length = 24;    // contiguous missing block length (time steps)
  int n_gaps = 6;         // blocks punched into each sequence
};

/// Affine-model coefficients for the "affine" model choice.
struct AffineOptions {
  Eigen::MatrixXd alpha;
  Eigen::VectorXd beta;
};

/// One experiment: model choice, sequence lengths, truth, algorithm set,
/// replication count and estimation settings. JSON configs mirror these
/// field names exactly.
struct ExperimentConfig {
  std::string model = "l63";  // sinus | l63 | affine | csv-data
  int T = 1000;
  int T_prime = 1000;
  double dt = 0.08;  // l63 integration step
  Theta true_theta;  // defaulted per model when absent
  int replications = 1;
  std::vector<std::string> algorithms;  // empty: all eight
  std::uint64_t seeds = 0;
  NpSemConfig npsem;
  int rmse_tail = 10;

  // extensions beyond the core field set (documented in the README)
  WaveOptions wave;      // csv-data only
  AffineOptions affine;  // affine only

  int state_dim() const;
  void validate() const;  // throws ConfigError
};

/// Parses and validates a JSON config document. Unknown keys and type
/// mismatches are ConfigErrors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Canonical normalized JSON form (every field populated), for
/// `validate-config` output.
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace npsem
