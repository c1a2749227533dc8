#pragma once

// Exact information measures over discrete distributions, in bits.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ibfrontier/detail/logmath.hpp"
#include "ibfrontier/errors.hpp"
#include "ibfrontier/matrix.hpp"
#include "ibfrontier/probability.hpp"

namespace ibf {

// Information measures are clamped at zero; rounding can otherwise leave
// values like -1e-17 for quantities that are non-negative by definition.

inline double entropy(std::span<double const> p) noexcept {
  double h = 0.0;
  for (double x : p)
    if (!detail::is_zero_mass(x)) h -= x * std::log(x);
  return h * detail::kInvLn2;
}

inline double entropy(Distribution const& d) noexcept { return entropy(d.mass()); }

/// D[p || q] in bits. Throws SupportError when p has mass where q has none.
inline double kl_divergence(std::span<double const> p, std::span<double const> q) {
  if (p.size() != q.size())
    throw DimensionError("kl_divergence: lengths " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  double const d = detail::kl_nats(p, q);
  if (std::isinf(d)) throw SupportError("kl_divergence: p has mass where q is zero");
  return std::max(0.0, d * detail::kInvLn2);
}

inline double kl_divergence(Distribution const& p, Distribution const& q) { return kl_divergence(p.mass(), q.mass()); }

/// Mutual information of a joint distribution given as a matrix.
inline double mutual_information(Matrix const& joint) noexcept {
  std::vector<double> rows(joint.rows(), 0.0), cols(joint.cols(), 0.0);
  for (std::size_t i = 0; i < joint.rows(); ++i)
    for (std::size_t j = 0; j < joint.cols(); ++j) {
      rows[i] += joint(i, j);
      cols[j] += joint(i, j);
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.rows(); ++i)
    for (std::size_t j = 0; j < joint.cols(); ++j) {
      double const pij = joint(i, j);
      if (detail::is_zero_mass(pij)) continue;
      mi += pij * std::log(pij / (rows[i] * cols[j]));
    }
  return std::max(0.0, mi * detail::kInvLn2);
}

namespace detail {

inline void require_aligned(NamingSystem const& sys, std::size_t num_meanings) {
  if (sys.num_meanings() != num_meanings)
    throw DimensionError("naming system has " + std::to_string(sys.num_meanings()) + " meanings but " +
                         std::to_string(num_meanings) + " were expected");
}

inline std::vector<double> word_marginal(Matrix const& q, std::span<double const> need) {
  std::vector<double> qw(q.cols(), 0.0);
  for (std::size_t m = 0; m < q.rows(); ++m)
    for (std::size_t w = 0; w < q.cols(); ++w) qw[w] += need[m] * q(m, w);
  return qw;
}

}  // namespace detail

/// Complexity I_q(M;W) = sum p(m) q(w|m) log q(w|m)/q(w).
inline double complexity(NamingSystem const& sys, Distribution const& need) {
  detail::require_aligned(sys, need.size());
  auto const& q = sys.encoder();
  auto const qw = detail::word_marginal(q, need.mass());
  double sum = 0.0;
  for (std::size_t m = 0; m < q.rows(); ++m) {
    if (detail::is_zero_mass(need[m])) continue;
    for (std::size_t w = 0; w < q.cols(); ++w) {
      double const x = q(m, w);
      if (detail::is_zero_mass(x)) continue;
      sum += need[m] * x * std::log(x / qw[w]);
    }
  }
  return std::max(0.0, sum * detail::kInvLn2);
}

/// Bayesian listener: m_hat_w = sum_m q(m|w) m. Rows for words with
/// q(w) = 0 are left at zero and flagged undefined.
struct ListenerModel {
  Matrix reconstructions;
  std::vector<double> word_mass;
  std::vector<bool> defined;

  std::span<double const> reconstruction(std::size_t w) const noexcept { return reconstructions.row(w); }
};

inline ListenerModel bayesian_listener(NamingSystem const& sys, MeaningSpace const& space) {
  detail::require_aligned(sys, space.num_meanings());
  auto const& q = sys.encoder();
  auto const& need = space.need();
  auto const& reps = space.representations();
  ListenerModel out;
  out.word_mass = detail::word_marginal(q, need.mass());
  out.reconstructions = Matrix(q.cols(), reps.cols());
  out.defined.assign(q.cols(), false);
  for (std::size_t w = 0; w < q.cols(); ++w) {
    if (detail::is_zero_mass(out.word_mass[w])) continue;
    out.defined[w] = true;
    auto row = out.reconstructions.row(w);
    for (std::size_t m = 0; m < q.rows(); ++m) {
      double const posterior = need[m] * q(m, w) / out.word_mass[w];
      if (posterior == 0.0) continue;
      for (std::size_t u = 0; u < reps.cols(); ++u) row[u] += posterior * reps(m, u);
    }
  }
  return out;
}

/// E[D[m || m_hat_w]] under p(m) q(w|m).
inline double expected_distortion(NamingSystem const& sys, MeaningSpace const& space) {
  auto const listener = bayesian_listener(sys, space);
  auto const& q = sys.encoder();
  auto const& need = space.need();
  double sum = 0.0;
  for (std::size_t m = 0; m < q.rows(); ++m) {
    if (detail::is_zero_mass(need[m])) continue;
    for (std::size_t w = 0; w < q.cols(); ++w) {
      double const weight = need[m] * q(m, w);
      if (detail::is_zero_mass(weight)) continue;
      sum += weight * kl_divergence(space.representation(m), listener.reconstruction(w));
    }
  }
  return std::max(0.0, sum);
}

/// Accuracy I_q(W;U) = sum_w q(w) D[m_hat_w || m_0].
inline double accuracy(NamingSystem const& sys, MeaningSpace const& space) {
  auto const listener = bayesian_listener(sys, space);
  auto const m0 = space.prior_representation();
  double sum = 0.0;
  for (std::size_t w = 0; w < listener.word_mass.size(); ++w) {
    if (!listener.defined[w]) continue;
    sum += listener.word_mass[w] * detail::kl_nats(listener.reconstruction(w), m0);
  }
  return std::max(0.0, sum * detail::kInvLn2);
}

/// F_beta[q] = I(M;W) - beta * I(W;U).
inline double ib_objective(NamingSystem const& sys, MeaningSpace const& space, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("ib_objective: beta must be non-negative");
  return complexity(sys, space.need()) - beta * accuracy(sys, space);
}

}  // namespace ibf
