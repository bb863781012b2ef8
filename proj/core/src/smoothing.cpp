#include "npsem/smoothing.hpp"

#include <stdexcept>

namespace npsem {

std::string to_string(EnsembleSource source) {
  switch (source) {
    case EnsembleSource::kCpfBs: return "cpf-bs";
    case EnsembleSource::kEnks: return "enks";
    case EnsembleSource::kKsGaussianDraw: return "ks-gaussian-draw";
  }
  return "unknown";
}

Eigen::MatrixXd SmoothingEnsemble::mean() const {
  validate();
  Eigen::MatrixXd acc = trajectories[0];
  for (size_t i = 1; i < trajectories.size(); ++i) acc += trajectories[i];
  return acc / static_cast<double>(trajectories.size());
}

void SmoothingEnsemble::validate() const {
  if (trajectories.empty()) {
    throw std::invalid_argument("SmoothingEnsemble: no trajectories");
  }
  const Eigen::Index rows = trajectories[0].rows();
  const Eigen::Index cols = trajectories[0].cols();
  if (rows < 1 || cols < 2) {
    throw std::invalid_argument("SmoothingEnsemble: members must be d x (T+1)");
  }
  for (const auto& m : trajectories) {
    if (m.rows() != rows || m.cols() != cols) {
      throw std::invalid_argument("SmoothingEnsemble: ragged member shapes");
    }
    if (!m.allFinite()) {
      throw std::invalid_argument("SmoothingEnsemble: non-finite entries");
    }
  }
}

void SmootherConfig::validate() const {
  if (n_filter < 1 || n_smooth < 1 || n_ens < 2) {
    throw std::invalid_argument(
        "SmootherConfig: need n_filter >= 1, n_smooth >= 1, n_ens >= 2");
  }
}

}  // namespace npsem
