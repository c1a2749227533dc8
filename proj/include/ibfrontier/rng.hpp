#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace ibf {

/// Counter-based generator: the n-th draw of stream (seed, key) is a pure
/// function of (seed, key, n), so streams can be evaluated in any order or
/// on any thread and still reproduce.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t key_hi, std::uint64_t key_lo = 0) noexcept
      : base_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) ^ mix(key_hi + 0x9e3779b97f4a7c15ULL) ^
                  mix(key_lo + 0xbb67ae8584caa73bULL))) {}

  std::uint64_t next_u64() noexcept { return mix(base_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection, bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    std::uint64_t const limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
    std::uint64_t x;
    do x = next_u64();
    while (x >= limit);
    return x % bound;
  }

  /// Standard normal via Box-Muller (one draw per call, the pair's sine half is dropped).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double const u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> xs) noexcept {
    for (std::size_t i = xs.size(); i > 1; --i) {
      auto const j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace ibf
