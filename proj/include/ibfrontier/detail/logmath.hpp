#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace ibf {

/// Probabilities below this are exact zeros wherever they enter a logarithm.
inline constexpr double kZeroMass = 1e-15;

namespace detail {

inline constexpr double kInvLn2 = 1.4426950408889634;  // 1 / ln 2
inline constexpr double kLn2 = 0.6931471805599453;

inline bool is_zero_mass(double p) noexcept { return p < kZeroMass; }

/// KL divergence in nats; +inf on a support violation. Terms with p below
/// kZeroMass are skipped; only an exact zero in q is a violation.
inline double kl_nats(std::span<double const> p, std::span<double const> q) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (is_zero_mass(p[i])) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

}  // namespace detail
}  // namespace ibf
