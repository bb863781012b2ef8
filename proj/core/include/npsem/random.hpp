#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace npsem {

/// Counter-based splittable random stream.
///
/// A stream is identified by a 64-bit key derived from (seed, lane path).
/// Draw i of a stream depends only on (key, i), so identical
/// (seed, stream-id, draw-count) gives identical values on every run and
/// under any thread schedule. `lane(tag)` derives an independent child
/// stream without touching the parent's counter, which is how particles,
/// time steps and replications get disjoint randomness.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_(derive(mix(seed), stream_id)) {}

  /// Independent child stream; deterministic function of (parent key, tag).
  RandomStream lane(std::uint64_t tag) const {
    RandomStream s;
    s.key_ = derive(key_, tag);
    return s;
  }
  RandomStream lane(std::uint64_t a, std::uint64_t b) const {
    return lane(a).lane(b);
  }
  RandomStream lane(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return lane(a).lane(b).lane(c);
  }

  std::uint64_t next_u64() {
    counter_ += 1;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1); safe under log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  /// Standard normal draw (Box-Muller, spare value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

  /// Index draw from normalized weights via inverse-CDF scan.
  int categorical(std::span<const double> weights) {
    const double u = uniform();
    double acc = 0.0;
    const int n = static_cast<int>(weights.size());
    for (int i = 0; i < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  std::uint64_t draw_count() const { return counter_; }

 private:
  RandomStream() = default;

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t derive(std::uint64_t key, std::uint64_t tag) {
    return mix(mix(key ^ 0x6a09e667f3bcc909ULL) + tag * 0xd2b74407b1ce6e93ULL);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fixed lane tags so call sites cannot collide by accident.
namespace rng_lane {
inline constexpr std::uint64_t kReplication = 1;
inline constexpr std::uint64_t kSimulateLearning = 2;
inline constexpr std::uint64_t kSimulateValidation = 3;
inline constexpr std::uint64_t kAlgorithm = 4;
inline constexpr std::uint64_t kIteration = 5;
inline constexpr std::uint64_t kInit = 6;
inline constexpr std::uint64_t kResample = 7;
inline constexpr std::uint64_t kPropagate = 8;
inline constexpr std::uint64_t kBackward = 9;
inline constexpr std::uint64_t kConditioning = 10;
inline constexpr std::uint64_t kObsPerturb = 11;
inline constexpr std::uint64_t kValidation = 12;
inline constexpr std::uint64_t kCrossValidation = 13;
inline constexpr std::uint64_t kGaps = 14;
inline constexpr std::uint64_t kWave = 15;
}  // namespace rng_lane

}  // namespace npsem
