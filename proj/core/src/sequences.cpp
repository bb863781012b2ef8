#include "npsem/sequences.hpp"

#include <stdexcept>

namespace npsem {

namespace {
void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void validate_observations(const Eigen::MatrixXd& values,
                           const std::vector<std::uint8_t>& mask) {
  require(values.rows() >= 1, "ObservationSequence: dimension must be positive");
  require(values.cols() >= 1, "ObservationSequence: need at least one time step");
  require(mask.size() == static_cast<size_t>(values.cols()),
          "ObservationSequence: mask length must equal horizon");
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    if (mask[static_cast<size_t>(t)] != 0) {
      require(values.col(t).allFinite(),
              "ObservationSequence: available entries must be finite");
    }
  }
}
}  // namespace

StateSequence::StateSequence(Eigen::MatrixXd values) : values_(std::move(values)) {
  require(values_.rows() >= 1, "StateSequence: state dimension must be positive");
  require(values_.cols() >= 2, "StateSequence: need at least x_0 and x_1");
  require(values_.allFinite(), "StateSequence: entries must be finite");
}

ObservationSequence::ObservationSequence(Eigen::MatrixXd values,
                                         std::vector<std::uint8_t> mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  validate_observations(values_, mask_);
}

ObservationSequence::ObservationSequence(Eigen::MatrixXd values)
    : values_(std::move(values)),
      mask_(static_cast<size_t>(values_.cols()), 1) {
  validate_observations(values_, mask_);
}

int ObservationSequence::observed_count() const {
  int n = 0;
  for (auto m : mask_) n += (m != 0);
  return n;
}

Eigen::VectorXd ObservationSequence::value(int t) const {
  if (t < 1 || t > horizon()) {
    throw std::out_of_range("ObservationSequence: time index out of range");
  }
  if (!observed(t)) {
    throw std::logic_error("ObservationSequence: read of masked observation");
  }
  return values_.col(t - 1);
}

CovariateSequence::CovariateSequence(Eigen::MatrixXd values)
    : values_(std::move(values)) {
  if (values_.size() > 0) {
    require(values_.allFinite(), "CovariateSequence: entries must be finite");
  }
}

}  // namespace npsem
