#pragma once

#include <cmath>
#include <cstdint>

namespace condcov {

/// SplitMix64 stream keyed by up to three values. Draws are reproducible
/// and independent of scheduling: a generator keyed by (seed, run, index)
/// always yields the same sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed + kGolden)) {}

  Rng(std::uint64_t seed, std::uint64_t key1, std::uint64_t key2 = 0) {
    state_ = mix(seed + kGolden);
    state_ = mix(state_ ^ mix(key1 + kGolden));
    state_ = mix(state_ ^ mix(key2 + kGolden));
  }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (cosine branch).
  double normal() {
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t v) {
    v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ULL;
    v = (v ^ (v >> 27)) * 0x94D049BB133111EBULL;
    return v ^ (v >> 31);
  }

  std::uint64_t state_;
};

}  // namespace condcov
