#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tsaudit {

/// Counter-based generator: draw number c of stream (seed, stream) is
/// splitmix64_mix(seed ^ mix(stream) + (c + 1) * 0x9E3779B97F4A7C15).
/// Every draw is a pure function of (seed, stream, counter), so fixtures are
/// reproducible on any platform and independent of call interleaving across
/// streams.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(seed ^ mix(stream + 0xD1B54A32D192ED03ULL)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t at(std::uint64_t counter) const noexcept {
    return mix(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  std::uint64_t next_u64() noexcept { return at(counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] (inclusive). Multiply-shift; bias below 2^-64 * range.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept {
    const std::uint64_t span = hi - lo + 1;
    if (span == 0) return next_u64();
    __extension__ using u128 = unsigned __int128;
    return lo + static_cast<std::uint64_t>((static_cast<u128>(next_u64()) * span) >> 64);
  }

  /// Standard normal by Box-Muller (cosine branch only: two draws per variate).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const noexcept { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tsaudit
