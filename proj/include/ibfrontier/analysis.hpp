#pragma once

// Evaluating naming systems against a frontier: inefficiency and fitted
// beta, gNID, permutation baselines, mixtures and category profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ibfrontier/infotheory.hpp"
#include "ibfrontier/probability.hpp"
#include "ibfrontier/rng.hpp"
#include "ibfrontier/solver.hpp"

namespace ibf {

/// Profile entries at or below this probability are left out of top lists.
inline constexpr double kProfileFloor = 1e-9;

struct EfficiencyReport {
  double complexity_bits = 0.0;
  double accuracy_bits = 0.0;
  double fitted_beta = 0.0;
  double inefficiency_bits = 0.0;
  double gnid = 0.0;
  std::size_t matched_index = 0;  // into Frontier::points
};

struct BaselineSummary {
  std::size_t num_samples = 0;
  double inefficiency_mean = 0.0;
  double inefficiency_sd = 0.0;
  double gnid_mean = 0.0;
  double gnid_sd = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> inefficiencies;  // per sample, in sample order
  std::vector<double> gnids;
};

struct CategoryProfile {
  std::string word_label;
  double mass = 0.0;
  std::vector<std::pair<std::string, double>> top_meanings;
  std::vector<std::pair<std::string, double>> top_features;
};

struct HierarchyLayer {
  std::size_t k = 0;
  double beta = 0.0;
  double complexity_bits = 0.0;
  double accuracy_bits = 0.0;
  std::vector<CategoryProfile> categories;
};

namespace detail {

inline void require_same_meanings(NamingSystem const& a, NamingSystem const& b) {
  if (a.meaning_labels() != b.meaning_labels())
    throw ValidationError("naming systems are defined over different meaning sets");
}

inline void require_aligned(NamingSystem const& sys, MeaningSpace const& space) {
  if (auto issues = validate_naming_system(sys, space); !issues.empty()) throw ValidationError(std::move(issues));
}

/// Mutual information between the words of `a` and `b` when both name the
/// same meaning drawn from `need`.
inline double cross_information(Matrix const& a, Matrix const& b, std::span<double const> need) {
  Matrix joint(a.cols(), b.cols());
  for (std::size_t m = 0; m < a.rows(); ++m) {
    if (need[m] == 0.0) continue;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double const pa = need[m] * a(m, i);
      if (pa == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) joint(i, j) += pa * b(m, j);
    }
  }
  return mutual_information(joint);
}

/// Inefficiency scan over a frontier for a system with known (C, A).
struct BetaFit {
  std::size_t index;
  double inefficiency;
};

inline BetaFit best_beta(Frontier const& frontier, double complexity_bits, double accuracy_bits) {
  BetaFit best{0, std::numeric_limits<double>::infinity()};
  bool found = false;
  for (std::size_t i = 0; i < frontier.points.size(); ++i) {
    auto const& p = frontier.points[i];
    if (!(p.beta > 0.0)) continue;
    double const f = complexity_bits - p.beta * accuracy_bits;
    double const eps = (f - p.objective_bits) / p.beta;
    if (!found || eps < best.inefficiency) {
      best = {i, eps};
      found = true;
    }
  }
  if (!found) throw ValidationError("frontier has no point with beta > 0");
  return best;
}

inline std::vector<std::pair<std::string, double>> top_n(std::vector<std::string> const& labels,
                                                         std::vector<double> const& values, std::size_t n) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < n && values[idx[i]] > kProfileFloor; ++i) out.emplace_back(labels[idx[i]], values[idx[i]]);
  return out;
}

}  // namespace detail

/// Generalized normalized information distance between two naming systems
/// over the same meanings: 1 - I(W1;W2) / max(I(W1;W1'), I(W2;W2')).
inline double gnid(NamingSystem const& a, NamingSystem const& b, Distribution const& need) {
  detail::require_same_meanings(a, b);
  if (need.size() != a.num_meanings())
    throw DimensionError("need has " + std::to_string(need.size()) + " entries but the systems have " +
                         std::to_string(a.num_meanings()) + " meanings");
  double const cross = detail::cross_information(a.encoder(), b.encoder(), need.mass());
  double const self_a = detail::cross_information(a.encoder(), a.encoder(), need.mass());
  double const self_b = detail::cross_information(b.encoder(), b.encoder(), need.mass());
  double const denom = std::max(self_a, self_b);
  if (denom <= 0.0) return 0.0;
  return 1.0 - cross / denom;
}

/// Fits beta_l on the frontier grid by minimizing the inefficiency
/// (F_beta[sys] - F*_beta) / beta; ties go to the smaller beta.
inline EfficiencyReport fit_beta(NamingSystem const& sys, MeaningSpace const& space, Frontier const& frontier) {
  if (frontier.points.empty()) throw ValidationError("frontier is empty");
  if (auto fp = fingerprint(space); fp != frontier.space_fingerprint) throw FingerprintMismatch(frontier.space_fingerprint, fp);
  detail::require_aligned(sys, space);

  EfficiencyReport r;
  r.complexity_bits = complexity(sys, space.need());
  r.accuracy_bits = accuracy(sys, space);
  auto const fit = detail::best_beta(frontier, r.complexity_bits, r.accuracy_bits);
  auto const& matched = frontier.points[fit.index];
  r.matched_index = fit.index;
  r.fitted_beta = matched.beta;
  r.inefficiency_bits = fit.inefficiency;
  r.gnid = gnid(sys, matched.encoder, space.need());
  return r;
}

/// The system with its rows reassigned: row m takes row perm[m] of `sys`.
inline NamingSystem permute_meanings(NamingSystem const& sys, std::span<std::size_t const> perm) {
  Matrix q(sys.num_meanings(), sys.num_words());
  for (std::size_t m = 0; m < perm.size(); ++m)
    for (std::size_t w = 0; w < sys.num_words(); ++w) q(m, w) = sys.encoder()(perm[m], w);
  return NamingSystem::unchecked(std::move(q), sys.word_labels(), sys.meaning_labels());
}

/// Permutation drawn for baseline sample `index`.
inline std::vector<std::size_t> baseline_permutation(std::size_t n, std::uint64_t seed, std::size_t index) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(seed, 0x62617365ULL, index);
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

struct BaselineOptions {
  bool include_identity = false;  // sample 0 is the unpermuted system
  unsigned threads = 1;
};

/// Hypothetical systems q'(w|m) = q(w|pi(m)) for random meaning
/// permutations pi, each evaluated with fit_beta. Reports the mean and
/// population SD of inefficiency and gNID.
inline BaselineSummary permutation_baseline(NamingSystem const& sys, MeaningSpace const& space,
                                            Frontier const& frontier, std::size_t num_samples, std::uint64_t seed,
                                            BaselineOptions const& options = {}) {
  if (num_samples == 0) throw std::invalid_argument("permutation_baseline: num_samples must be at least 1");
  if (frontier.points.empty()) throw ValidationError("frontier is empty");
  if (auto fp = fingerprint(space); fp != frontier.space_fingerprint) throw FingerprintMismatch(frontier.space_fingerprint, fp);
  detail::require_aligned(sys, space);

  BaselineSummary out;
  out.num_samples = num_samples;
  out.seed = seed;
  out.inefficiencies.assign(num_samples, 0.0);
  out.gnids.assign(num_samples, 0.0);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<std::size_t> perm(sys.num_meanings());
      if (options.include_identity && i == 0) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
      } else {
        perm = baseline_permutation(sys.num_meanings(), seed, i);
      }
      auto const permuted = permute_meanings(sys, perm);
      double const c = complexity(permuted, space.need());
      double const a = accuracy(permuted, space);
      auto const fit = detail::best_beta(frontier, c, a);
      out.inefficiencies[i] = fit.inefficiency;
      out.gnids[i] = gnid(permuted, frontier.points[fit.index].encoder, space.need());
    }
  };

  unsigned const threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(num_samples)));
  if (threads == 1) {
    run(0, num_samples);
  } else {
    std::vector<std::jthread> pool;
    std::size_t const chunk = (num_samples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      std::size_t const b = t * chunk, e = std::min(num_samples, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
  }

  auto mean_sd = [](std::vector<double> const& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(xs.size()))};
  };
  std::tie(out.inefficiency_mean, out.inefficiency_sd) = mean_sd(out.inefficiencies);
  std::tie(out.gnid_mean, out.gnid_sd) = mean_sd(out.gnids);
  return out;
}

/// Joint system that picks `a` with probability `weight`, else `b`, over the
/// disjoint union of their (tagged) word sets.
inline NamingSystem mixture_system(NamingSystem const& a, NamingSystem const& b, double weight,
                                   std::string const& tag_a = "A", std::string const& tag_b = "B") {
  detail::require_same_meanings(a, b);
  if (!(weight >= 0.0 && weight <= 1.0)) throw std::invalid_argument("mixture weight must be in [0, 1]");
  if (tag_a == tag_b) throw std::invalid_argument("mixture language tags must differ");
  std::size_t const n = a.num_meanings();
  Matrix q(n, a.num_words() + b.num_words());
  std::vector<std::string> labels;
  for (auto const& w : a.word_labels()) labels.push_back(tag_a + ":" + w);
  for (auto const& w : b.word_labels()) labels.push_back(tag_b + ":" + w);
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t w = 0; w < a.num_words(); ++w) q(m, w) = weight * a.encoder()(m, w);
    for (std::size_t w = 0; w < b.num_words(); ++w) q(m, a.num_words() + w) = (1.0 - weight) * b.encoder()(m, w);
  }
  return NamingSystem::unchecked(std::move(q), std::move(labels), a.meaning_labels());
}

inline double mixture_complexity(NamingSystem const& a, NamingSystem const& b, Distribution const& need,
                                 double weight = 0.5) {
  return complexity(mixture_system(a, b, weight), need);
}

/// One profile per word above `threshold` mass, heaviest first.
inline std::vector<CategoryProfile> category_profiles(FrontierPoint const& point, MeaningSpace const& space,
                                                      std::size_t top_n,
                                                      double threshold = kCategoryMassThreshold) {
  auto const& sys = point.encoder;
  detail::require_aligned(sys, space);
  if (top_n == 0 || top_n > space.num_meanings() || top_n > space.num_universe())
    throw std::invalid_argument("category_profiles: top_n must be in [1, " +
                                std::to_string(std::min(space.num_meanings(), space.num_universe())) + "]");
  auto const listener = bayesian_listener(sys, space);
  auto const& need = space.need();

  std::vector<CategoryProfile> out;
  for (std::size_t w = 0; w < sys.num_words(); ++w) {
    double const qw = listener.word_mass[w];
    if (!(qw > threshold)) continue;
    std::vector<double> posterior(sys.num_meanings());
    for (std::size_t m = 0; m < posterior.size(); ++m) posterior[m] = need[m] * sys.encoder()(m, w) / qw;
    auto const recon = listener.reconstruction(w);
    CategoryProfile p;
    p.word_label = sys.word_labels()[w];
    p.mass = qw;
    p.top_meanings = detail::top_n(space.meaning_labels(), posterior, top_n);
    p.top_features = detail::top_n(space.universe_labels(), {recon.begin(), recon.end()}, top_n);
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](auto const& x, auto const& y) { return x.mass > y.mass; });
  return out;
}

/// Most informative point for each k (ascending) with its category profiles.
inline std::vector<HierarchyLayer> hierarchy_report(Frontier const& frontier, std::vector<std::size_t> ks,
                                                    MeaningSpace const& space, std::size_t top_n,
                                                    double threshold = kCategoryMassThreshold) {
  if (frontier.points.empty()) throw ValidationError("frontier is empty");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<HierarchyLayer> layers;
  for (auto k : ks) {
    auto const& point = select_most_informative_with_k(frontier, k, threshold);
    HierarchyLayer layer;
    layer.k = k;
    layer.beta = point.beta;
    layer.complexity_bits = point.complexity_bits;
    layer.accuracy_bits = point.accuracy_bits;
    layer.categories = category_profiles(point, space, top_n, threshold);
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace ibf
