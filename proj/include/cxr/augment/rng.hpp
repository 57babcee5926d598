#pragma once

#include <cstdint>

namespace cxr::augment {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function applied to a raw state word.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// First SplitMix64 output for a generator seeded with `seed`.
constexpr std::uint64_t splitmix64(std::uint64_t seed) { return splitmix64_mix(seed + kSplitMixGamma); }

/// Per-image seed for parallel augmentation.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base ^ index); }

/// SplitMix64 stream addressed by (seed, position). The n-th draw (0-based)
/// is splitmix64_mix(seed + (n + 1) * gamma), so a state can be copied,
/// stored, and replayed anywhere.
class RngState {
 public:
  constexpr explicit RngState(std::uint64_t seed = 0, std::uint64_t position = 0) : seed_(seed), position_(position) {}

  constexpr std::uint64_t seed() const { return seed_; }
  constexpr std::uint64_t position() const { return position_; }

  constexpr std::uint64_t next_u64() {
    ++position_;
    return splitmix64_mix(seed_ + position_ * kSplitMixGamma);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double next_unit();

  /// Uniform in [lo, hi); returns exactly lo when lo == hi. Always advances
  /// the stream by one.
  double next_uniform(double lo, double hi);

  /// Uniform integer in [0, bound) by 128-bit multiply-shift. bound > 0.
  std::uint64_t next_below(std::uint64_t bound);

  bool operator==(const RngState&) const = default;

 private:
  std::uint64_t seed_;
  std::uint64_t position_;
};

}  // namespace cxr::augment
