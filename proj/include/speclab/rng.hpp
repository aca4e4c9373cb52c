#pragma once

#include <cstdint>
#include <limits>

namespace speclab {

/// SplitMix64 output finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based 64-bit generator: the k-th output is a fixed function of
/// (seed, stream, k), so any draw can be reproduced without replaying the
/// sequence and distinct streams never share state.
///
/// Satisfies UniformRandomBitGenerator, but the library only consumes it
/// through uniform01() so results do not depend on the standard library's
/// distribution implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class SeedPurpose : std::uint64_t { latents = 0, adjacency = 1 };

/// Derives the seed for one replicate. For a fixed master seed the map
/// (replicate_index, purpose) -> seed is injective for replicate_index < 2^63.
constexpr std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t replicate_index,
                                       SeedPurpose purpose) noexcept {
  const std::uint64_t packed = (replicate_index << 1) | static_cast<std::uint64_t>(purpose);
  return mix64(mix64(master_seed) ^ packed);
}

}  // namespace speclab
