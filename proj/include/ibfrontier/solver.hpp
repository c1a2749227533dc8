#pragma once

// Information Bottleneck optimal encoders via the self-consistent
// fixed-point updates, and the efficiency frontier by annealing over beta.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ibfrontier/detail/logmath.hpp"
#include "ibfrontier/infotheory.hpp"
#include "ibfrontier/matrix.hpp"
#include "ibfrontier/probability.hpp"
#include "ibfrontier/rng.hpp"

namespace ibf {

/// Words whose reconstructions agree to this max-norm distance are merged.
inline constexpr double kDuplicateTolerance = 1e-8;
/// Default mass below which a category is not counted (and is pruned).
inline constexpr double kCategoryMassThreshold = 1e-5;
/// Updates between checks for word pairs whose merge lowers F_beta.
inline constexpr int kMergeCheckInterval = 50;
/// Weight of the uniform row mixed into encoders with exact zeros.
inline constexpr double kSmoothing = 1e-3;
/// Std-dev of the log-normal restart perturbation.
inline constexpr double kRestartNoise = 0.1;

enum class AnnealDirection { high_to_low, low_to_high };

inline char const* to_string(AnnealDirection d) noexcept {
  return d == AnnealDirection::high_to_low ? "high-to-low" : "low-to-high";
}

struct SolverConfig {
  std::vector<double> beta_grid;
  std::size_t max_clusters = 0;  // 0: one per meaning
  double convergence_tol = 1e-10;
  int max_iterations = 30000;
  double mass_prune_threshold = kCategoryMassThreshold;
  int restarts = 0;
  std::uint64_t seed = 0;
  AnnealDirection direction = AnnealDirection::high_to_low;

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (beta_grid.empty()) issues.emplace_back("beta grid is empty");
    for (std::size_t i = 0; i < beta_grid.size(); ++i) {
      if (!(beta_grid[i] >= 0.0) || !std::isfinite(beta_grid[i]))
        issues.push_back("beta grid entry " + std::to_string(i) + " is not a finite non-negative number");
      if (i > 0 && !(beta_grid[i] > beta_grid[i - 1]))
        issues.push_back("beta grid is not strictly increasing at index " + std::to_string(i));
    }
    if (!(convergence_tol > 0.0)) issues.emplace_back("convergence tolerance must be positive");
    if (max_iterations < 1) issues.emplace_back("max iterations must be at least 1");
    if (!(mass_prune_threshold >= 0.0 && mass_prune_threshold < 1.0))
      issues.emplace_back("mass prune threshold must be in [0, 1)");
    if (restarts < 0) issues.emplace_back("restarts must be non-negative");
    return issues;
  }
};

/// beta = 0 followed by `count - 1` log-spaced values from `log_start` to
/// `beta_max` inclusive.
inline std::vector<double> log_beta_grid(double beta_max, std::size_t count, double log_start = 0.1) {
  if (count == 0) throw std::invalid_argument("beta grid needs at least one value");
  if (!(beta_max > log_start) || !(log_start > 0.0))
    throw std::invalid_argument("beta grid needs 0 < log_start < beta_max");
  std::vector<double> grid{0.0};
  if (count == 1) return grid;
  if (count == 2) {
    grid.push_back(beta_max);
    return grid;
  }
  double const lo = std::log(log_start);
  double const hi = std::log(beta_max);
  auto const n = count - 1;
  for (std::size_t i = 0; i < n; ++i) {
    double const t = static_cast<double>(i) / static_cast<double>(n - 1);
    grid.push_back(i + 1 == n ? beta_max : std::exp(lo + t * (hi - lo)));
  }
  return grid;
}

struct FrontierPoint {
  double beta = 0.0;
  double complexity_bits = 0.0;
  double accuracy_bits = 0.0;
  double objective_bits = 0.0;
  std::size_t effective_k = 1;
  NamingSystem encoder;
  std::vector<double> word_mass;  // q(w) of `encoder` under the space's need
  bool converged = false;
  int iterations = 0;
};

struct Frontier {
  std::vector<FrontierPoint> points;  // ascending beta
  std::string space_fingerprint;
  SolverConfig config;
};

namespace detail {

/// Scratch buffers for evaluating and updating one encoder at fixed beta.
class IbWorkspace {
 public:
  IbWorkspace(MeaningSpace const& space, double beta)
      : reps_(space.representations()),
        need_(space.need().mass()),
        beta_(beta),
        information_(space.meaning_information()),
        neg_entropy_(space.num_meanings(), 0.0) {
    for (std::size_t m = 0; m < reps_.rows(); ++m)
      for (double x : reps_.row(m))
        if (!is_zero_mass(x)) neg_entropy_[m] += x * std::log(x);
  }

  /// Recomputes q(w), listener rows and distortions for `q`; returns F_beta in bits.
  double evaluate(Matrix const& q) {
    std::size_t const n = q.rows(), k = q.cols(), nu = reps_.cols();
    qw_.assign(k, 0.0);
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t w = 0; w < k; ++w) qw_[w] += need_[m] * q(m, w);

    recon_ = Matrix(k, nu);
    log_recon_ = Matrix(k, nu, -std::numeric_limits<double>::infinity());
    for (std::size_t w = 0; w < k; ++w) {
      if (qw_[w] <= 0.0) continue;
      auto row = recon_.row(w);
      for (std::size_t m = 0; m < n; ++m) {
        double const post = need_[m] * q(m, w) / qw_[w];
        if (post == 0.0) continue;
        auto const rep = reps_.row(m);
        for (std::size_t u = 0; u < nu; ++u) row[u] += post * rep[u];
      }
      for (std::size_t u = 0; u < nu; ++u)
        if (row[u] > 0.0) log_recon_(w, u) = std::log(row[u]);
    }

    // Words whose listener rows have no zeros take a branch-free dot product.
    full_support_.assign(k, 0);
    for (std::size_t w = 0; w < k; ++w) {
      if (qw_[w] <= 0.0) continue;
      auto const lr = log_recon_.row(w);
      full_support_[w] = std::none_of(lr.begin(), lr.end(), [](double x) { return std::isinf(x); });
    }
    dist_ = Matrix(n, k, std::numeric_limits<double>::infinity());
    for (std::size_t m = 0; m < n; ++m) {
      auto const rep = reps_.row(m);
      for (std::size_t w = 0; w < k; ++w) {
        if (qw_[w] <= 0.0) continue;
        auto const lr = log_recon_.row(w);
        double cross = 0.0;
        if (full_support_[w]) {
          double acc[4] = {0.0, 0.0, 0.0, 0.0};
          std::size_t u = 0;
          for (; u + 4 <= nu; u += 4)
            for (std::size_t j = 0; j < 4; ++j) acc[j] += rep[u + j] * lr[u + j];
          for (; u < nu; ++u) acc[0] += rep[u] * lr[u];
          cross = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        } else {
          bool finite = true;
          for (std::size_t u = 0; u < nu; ++u) {
            if (is_zero_mass(rep[u])) continue;
            if (std::isinf(lr[u])) {
              finite = false;
              break;
            }
            cross += rep[u] * lr[u];
          }
          if (!finite) continue;
        }
        dist_(m, w) = std::max(0.0, neg_entropy_[m] - cross);
      }
    }

    double mi = 0.0, distortion = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      if (is_zero_mass(need_[m])) continue;
      for (std::size_t w = 0; w < k; ++w) {
        double const x = q(m, w);
        if (is_zero_mass(x)) continue;
        mi += need_[m] * x * std::log(x / qw_[w]);
        distortion += need_[m] * x * dist_(m, w);
      }
    }
    complexity_ = mi * kInvLn2;
    accuracy_ = information_ - distortion * kInvLn2;
    return complexity_ - beta_ * accuracy_;
  }

  /// q(w|m) <- q(w) exp(-beta D_nats[m || m_hat_w]), row-normalized.
  /// Requires a preceding evaluate().
  void update(Matrix& q) const {
    std::size_t const n = q.rows(), k = q.cols();
    std::vector<double> logits(k);
    for (std::size_t m = 0; m < n; ++m) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t w = 0; w < k; ++w) {
        if (qw_[w] <= 0.0 || (beta_ > 0.0 && std::isinf(dist_(m, w)))) {
          logits[w] = -std::numeric_limits<double>::infinity();
        } else {
          logits[w] = std::log(qw_[w]) - (beta_ > 0.0 ? beta_ * dist_(m, w) : 0.0);
        }
        best = std::max(best, logits[w]);
      }
      if (std::isinf(best)) {
        // No word can reconstruct this meaning (it has zero need); follow q(w).
        for (std::size_t w = 0; w < k; ++w) q(m, w) = qw_[w];
        continue;
      }
      double total = 0.0;
      for (std::size_t w = 0; w < k; ++w) {
        double const e = std::isinf(logits[w]) ? 0.0 : std::exp(logits[w] - best);
        q(m, w) = e;
        total += e;
      }
      for (std::size_t w = 0; w < k; ++w) q(m, w) /= total;
    }
  }

  std::vector<double> const& word_mass() const noexcept { return qw_; }
  Matrix const& reconstructions() const noexcept { return recon_; }
  double complexity() const noexcept { return complexity_; }
  double accuracy() const noexcept { return accuracy_; }

 private:
  Matrix const& reps_;
  std::span<double const> need_;
  double beta_;
  double information_;
  std::vector<double> neg_entropy_;
  std::vector<double> qw_;
  Matrix recon_;
  Matrix log_recon_;
  Matrix dist_;
  std::vector<char> full_support_;
  double complexity_ = 0.0;
  double accuracy_ = 0.0;
};

struct IterateResult {
  Matrix q;
  double objective;
  int iterations;
  bool converged;
};

/// Squared extrapolation along log q(w|m): returns the step length
/// alpha <= -1 for x0 -> x1 -> x2, or 0 when the sequence has stalled.
inline double squared_step(Matrix const& x0, Matrix const& x1, Matrix const& x2) {
  double rr = 0.0, vv = 0.0;
  for (std::size_t m = 0; m < x0.rows(); ++m)
    for (std::size_t w = 0; w < x0.cols(); ++w) {
      if (x0(m, w) <= 0.0 || x1(m, w) <= 0.0 || x2(m, w) <= 0.0) continue;
      double const a = std::log(x0(m, w)), b = std::log(x1(m, w)), c = std::log(x2(m, w));
      rr += (b - a) * (b - a);
      vv += (c - 2.0 * b + a) * (c - 2.0 * b + a);
    }
  if (!(vv > 0.0)) return 0.0;
  return std::min(-1.0, -std::sqrt(rr / vv));
}

/// x0 - 2 alpha r + alpha^2 v in log q, row-normalized. Zero entries stay zero.
inline Matrix extrapolate(Matrix const& x0, Matrix const& x1, Matrix const& x2, double alpha) {
  std::size_t const n = x0.rows(), k = x0.cols();
  Matrix out(n, k);
  std::vector<double> logits(k);
  for (std::size_t m = 0; m < n; ++m) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < k; ++w) {
      if (x0(m, w) <= 0.0 || x1(m, w) <= 0.0 || x2(m, w) <= 0.0) {
        logits[w] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double const a = std::log(x0(m, w)), b = std::log(x1(m, w)), c = std::log(x2(m, w));
      logits[w] = a - 2.0 * alpha * (b - a) + alpha * alpha * (c - 2.0 * b + a);
      top = std::max(top, logits[w]);
    }
    if (std::isinf(top)) return {};
    double total = 0.0;
    for (std::size_t w = 0; w < k; ++w) {
      out(m, w) = std::isinf(logits[w]) ? 0.0 : std::exp(logits[w] - top);
      total += out(m, w);
    }
    for (std::size_t w = 0; w < k; ++w) out(m, w) /= total;
  }
  return out;
}

/// Runs updates from `q` until |dF| < tol or the budget runs out. On
/// convergence returns the iterate whose own update moved F by less than
/// tol; otherwise the lowest-objective iterate. Every second update is
/// followed by a squared extrapolation step, kept only if it lowers F.
inline IterateResult iterate(IbWorkspace& ws, Matrix q, double tol, int budget) {
  constexpr int kBacktracks = 2;
  double f = ws.evaluate(q);
  Matrix best = q;
  double best_f = f;
  Matrix x0 = q, x1, prev;
  int it = 0;
  while (it < budget) {
    prev = q;
    ws.update(q);
    ++it;
    double const next = ws.evaluate(q);
    if (std::abs(next - f) < tol) return {std::move(prev), f, it, true};
    if (next <= best_f) {
      best = q;
      best_f = next;
    }
    f = next;
    if (x1.rows() == 0) {
      x1 = q;
      continue;
    }
    double alpha = squared_step(x0, x1, q);
    bool moved = false;
    for (int t = 0; t < kBacktracks && alpha < -1.0 && it < budget; ++t, alpha = (alpha - 1.0) / 2.0) {
      Matrix jump = extrapolate(x0, x1, q, alpha);
      if (jump.rows() == 0) break;
      ws.evaluate(jump);
      ws.update(jump);
      ++it;
      double const g = ws.evaluate(jump);
      if (g < f) {
        q = std::move(jump);
        f = g;
        if (g <= best_f) {
          best = q;
          best_f = g;
        }
        moved = true;
        break;
      }
    }
    if (!moved) ws.evaluate(q);
    x1 = Matrix();
    x0 = q;
  }
  return {std::move(best), best_f, it, false};
}

/// Drops columns below `threshold` mass and merges columns whose listener
/// rows coincide. Returns false when nothing changed.
inline bool compact(IbWorkspace& ws, Matrix& q, std::vector<std::size_t>& ids, double threshold) {
  ws.evaluate(q);
  auto const& qw = ws.word_mass();
  auto const& recon = ws.reconstructions();
  std::size_t const k = q.cols();

  std::vector<std::size_t> alive;
  for (std::size_t w = 0; w < k; ++w)
    if (qw[w] > 0.0 && qw[w] >= threshold) alive.push_back(w);
  if (alive.empty()) alive.push_back(static_cast<std::size_t>(std::max_element(qw.begin(), qw.end()) - qw.begin()));

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t w : alive) {
    bool placed = false;
    for (auto& g : groups) {
      auto const a = recon.row(g.front());
      auto const b = recon.row(w);
      double dmax = 0.0;
      for (std::size_t u = 0; u < a.size(); ++u) dmax = std::max(dmax, std::abs(a[u] - b[u]));
      if (dmax < kDuplicateTolerance) {
        g.push_back(w);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({w});
  }
  if (groups.size() == k) return false;

  Matrix next(q.rows(), groups.size());
  std::vector<std::size_t> next_ids(groups.size());
  std::vector<double> next_mass(groups.size(), 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    next_ids[g] = ids[groups[g].front()];
    for (std::size_t w : groups[g]) {
      next_ids[g] = std::min(next_ids[g], ids[w]);
      next_mass[g] += qw[w];
      for (std::size_t m = 0; m < q.rows(); ++m) next(m, g) += q(m, w);
    }
  }
  double const mass_total = std::accumulate(next_mass.begin(), next_mass.end(), 0.0);
  for (std::size_t m = 0; m < q.rows(); ++m) {
    auto row = next.row(m);
    double const s = sum_of(row);
    if (s > 0.0) {
      for (double& x : row) x /= s;
    } else {
      for (std::size_t g = 0; g < row.size(); ++g) row[g] = next_mass[g] / mass_total;
    }
  }
  q = std::move(next);
  ids = std::move(next_ids);
  return true;
}

/// Jensen-Shannon divergence in nats with weights (wa, 1 - wa).
inline double js_nats(std::span<double const> a, std::span<double const> b, double wa) {
  double const wb = 1.0 - wa;
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double const mix = wa * a[i] + wb * b[i];
    if (mix <= 0.0) continue;
    if (a[i] > 0.0) out += wa * a[i] * std::log(a[i] / mix);
    if (b[i] > 0.0) out += wb * b[i] * std::log(b[i] / mix);
  }
  return out;
}

/// Merges every disjoint pair of words whose merge lowers F_beta, using the
/// exact merge cost from the workspace's last evaluate(). Coalescing words
/// otherwise take thousands of updates to meet. Returns false when nothing
/// merged.
inline bool merge_improving(IbWorkspace const& ws, MeaningSpace const& space, double beta, Matrix& q,
                            std::vector<std::size_t>& ids) {
  std::size_t const n = q.rows(), k = q.cols();
  if (k < 2 || !(beta > 0.0)) return false;
  auto const need = space.need().mass();
  auto const& qw = ws.word_mass();
  auto const& recon = ws.reconstructions();
  Matrix post(k, n);
  for (std::size_t w = 0; w < k; ++w)
    if (qw[w] > 0.0)
      for (std::size_t m = 0; m < n; ++m) post(w, m) = need[m] * q(m, w) / qw[w];
  struct Pair {
    double delta;
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      double const mass = qw[a] + qw[b];
      if (!(mass > 0.0)) continue;
      double const wa = qw[a] / mass;
      double const delta = beta * mass * js_nats(recon.row(a), recon.row(b), wa) -
                           mass * js_nats(post.row(a), post.row(b), wa);
      if (delta < 0.0) pairs.push_back({delta, a, b});
    }
  if (pairs.empty()) return false;
  std::sort(pairs.begin(), pairs.end(), [](Pair const& x, Pair const& y) {
    return x.delta != y.delta ? x.delta < y.delta : std::pair(x.a, x.b) < std::pair(y.a, y.b);
  });
  std::vector<std::size_t> target(k);
  std::iota(target.begin(), target.end(), std::size_t{0});
  std::vector<char> taken(k, 0);
  for (auto const& p : pairs) {
    if (taken[p.a] || taken[p.b]) continue;
    taken[p.a] = taken[p.b] = 1;
    target[p.b] = p.a;
  }
  std::vector<std::size_t> column(k, k);
  std::size_t cols = 0;
  for (std::size_t w = 0; w < k; ++w)
    if (target[w] == w) column[w] = cols++;
  Matrix next(n, cols);
  std::vector<std::size_t> next_ids(cols);
  for (std::size_t w = 0; w < k; ++w)
    if (target[w] == w) next_ids[column[w]] = ids[w];
  for (std::size_t w = 0; w < k; ++w) {
    std::size_t const c = column[target[w]];
    next_ids[c] = std::min(next_ids[c], ids[w]);
    for (std::size_t m = 0; m < n; ++m) next(m, c) += q(m, w);
  }
  q = std::move(next);
  ids = std::move(next_ids);
  return true;
}

inline std::vector<std::string> word_ids_to_labels(std::vector<std::size_t> const& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back("w" + std::to_string(id));
  return out;
}

/// Recovers numeric ids from "w<id>" labels; falls back to column positions.
inline std::vector<std::size_t> labels_to_word_ids(std::vector<std::string> const& labels) {
  std::vector<std::size_t> ids;
  ids.reserve(labels.size());
  for (auto const& l : labels) {
    if (l.size() < 2 || l[0] != 'w' || l.find_first_not_of("0123456789", 1) != std::string::npos) break;
    ids.push_back(std::stoull(l.substr(1)));
  }
  auto sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (ids.size() != labels.size() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    ids.resize(labels.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  }
  return ids;
}

inline FrontierPoint make_point(MeaningSpace const& space, double beta, Matrix q, std::vector<std::size_t> const& ids,
                                bool converged, int iterations, double threshold) {
  FrontierPoint p;
  p.beta = beta;
  p.encoder = NamingSystem::create(std::move(q), word_ids_to_labels(ids), space.meaning_labels());
  p.complexity_bits = complexity(p.encoder, space.need());
  p.accuracy_bits = accuracy(p.encoder, space);
  p.objective_bits = p.complexity_bits - beta * p.accuracy_bits;
  p.word_mass = word_marginal(p.encoder.encoder(), space.need().mass());
  p.effective_k = 0;
  for (double x : p.word_mass)
    if (x > threshold) ++p.effective_k;
  p.effective_k = std::max<std::size_t>(p.effective_k, 1);
  p.converged = converged;
  p.iterations = iterations;
  return p;
}

inline Matrix perturb(Matrix q, CounterRng& rng) {
  for (std::size_t m = 0; m < q.rows(); ++m) {
    auto row = q.row(m);
    for (double& x : row) x *= std::exp(kRestartNoise * rng.normal());
    renormalize(row);
  }
  return q;
}

/// Mixes every row with the uniform row over the same words. Exact zeros are
/// fixed points of the update when a listener gives a meaning's features zero
/// probability, so a hard start can never soften without this.
inline Matrix smooth(Matrix q, double eta) {
  double const u = 1.0 / static_cast<double>(q.cols());
  for (std::size_t m = 0; m < q.rows(); ++m)
    for (double& x : q.row(m)) x = (1.0 - eta) * x + eta * u;
  return q;
}

inline bool has_zero(Matrix const& q) {
  for (std::size_t m = 0; m < q.rows(); ++m)
    for (double x : q.row(m))
      if (x == 0.0) return true;
  return false;
}

inline double l1_distance(std::span<double const> a, std::span<double const> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

/// `q` with column `w` split around two seed meanings: the member farthest
/// from the column's listener row and the member farthest from that one.
/// Each member sends 90% of its mass toward its nearer seed. Returns an
/// empty matrix when the column has fewer than two members. Small random
/// perturbations grow too slowly near a bifurcation to separate within the
/// convergence tolerance.
inline Matrix split_column(MeaningSpace const& space, Matrix const& q, std::size_t w) {
  constexpr double kMember = 1e-3;
  auto const need = space.need().mass();
  auto const& reps = space.representations();
  std::vector<std::size_t> members;
  std::vector<double> recon(reps.cols(), 0.0);
  double mass = 0.0;
  for (std::size_t m = 0; m < q.rows(); ++m) {
    if (q(m, w) > kMember) members.push_back(m);
    double const p = need[m] * q(m, w);
    mass += p;
    for (std::size_t u = 0; u < reps.cols(); ++u) recon[u] += p * reps(m, u);
  }
  if (members.size() < 2 || !(mass > 0.0)) return {};
  for (double& x : recon) x /= mass;
  auto farthest = [&](std::span<double const> from) {
    std::size_t best = members.front();
    double d = -1.0;
    for (std::size_t m : members)
      if (double const dm = l1_distance(reps.row(m), from); dm > d) {
        d = dm;
        best = m;
      }
    return best;
  };
  std::size_t const a = farthest(recon);
  std::size_t const b = farthest(reps.row(a));
  Matrix out(q.rows(), q.cols() + 1);
  for (std::size_t m = 0; m < q.rows(); ++m) {
    for (std::size_t c = 0; c < q.cols(); ++c) out(m, c) = q(m, c);
    double const share = l1_distance(reps.row(m), reps.row(b)) < l1_distance(reps.row(m), reps.row(a)) ? 0.9 : 0.1;
    out(m, w) = (1.0 - share) * q(m, w);
    out(m, q.cols()) = share * q(m, w);
  }
  return out;
}

}  // namespace detail

/// IB-optimal encoder at one beta, starting from `init`. Iterates the
/// self-consistent updates, then prunes light words and merges duplicate
/// ones, re-iterating until the word set is stable.
inline FrontierPoint solve_at_beta(MeaningSpace const& space, double beta, NamingSystem const& init,
                                   SolverConfig const& config) {
  if (!(beta >= 0.0)) throw std::invalid_argument("solve_at_beta: beta must be non-negative");
  if (auto issues = validate_naming_system(init, space); !issues.empty()) throw ValidationError(std::move(issues));
  detail::IbWorkspace ws(space, beta);

  Matrix const& start = init.encoder();
  double const start_f = ws.evaluate(start);

  Matrix q = start;
  std::vector<std::size_t> ids = detail::labels_to_word_ids(init.word_labels());
  int used = 0;
  bool converged = false;
  double f = start_f;
  for (int round = 0; round < 64; ++round) {
    auto r = detail::iterate(ws, std::move(q), config.convergence_tol,
                             std::min(kMergeCheckInterval, std::max(1, config.max_iterations - used)));
    used += r.iterations;
    q = std::move(r.q);
    f = r.objective;
    converged = r.converged;
    if (!converged && used < config.max_iterations) {
      ws.evaluate(q);
      detail::merge_improving(ws, space, beta, q, ids);
      --round;  // chunk boundaries do not count as compaction rounds
      continue;
    }
    if (!detail::compact(ws, q, ids, config.mass_prune_threshold)) break;
    f = ws.evaluate(q);
    if (used >= config.max_iterations) {
      converged = false;
      break;
    }
  }

  if (f > start_f + config.convergence_tol) {
    // Post-processing cost more than it saved; keep the starting encoder.
    return detail::make_point(space, beta, start, detail::labels_to_word_ids(init.word_labels()), converged, used,
                              config.mass_prune_threshold);
  }
  return detail::make_point(space, beta, std::move(q), ids, converged, used, config.mass_prune_threshold);
}

/// |F_beta change| after one more fixed-point update of the point's encoder.
inline double fixed_point_residual(MeaningSpace const& space, FrontierPoint const& point) {
  detail::IbWorkspace ws(space, point.beta);
  Matrix q = point.encoder.encoder();
  double const before = ws.evaluate(q);
  ws.update(q);
  return std::abs(ws.evaluate(q) - before);
}

/// Identity-like starting encoder with `k` words: meaning m uses word m mod k.
inline NamingSystem initial_encoder(MeaningSpace const& space, std::size_t k) {
  std::size_t const n = space.num_meanings();
  Matrix q(n, k);
  for (std::size_t m = 0; m < n; ++m) q(m, m % k) = 1.0;
  std::vector<std::size_t> ids(k);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return NamingSystem::create(std::move(q), detail::word_ids_to_labels(ids), space.meaning_labels());
}

namespace detail {

struct MergeCandidate {
  std::size_t a = 0, b = 0;
  double delta_bits = 0.0;  // change in F_beta
};

/// Exact F_beta change of merging each pair of words into one, from the
/// Jensen-Shannon divergences of their meaning posteriors and listener
/// rows. Returns the best pair.
inline MergeCandidate best_merge(MeaningSpace const& space, double beta, Matrix const& q) {
  std::size_t const n = q.rows(), k = q.cols();
  MergeCandidate best;
  best.delta_bits = std::numeric_limits<double>::infinity();
  if (k < 2) return best;
  auto const need = space.need().mass();
  auto const& reps = space.representations();
  std::vector<double> qw(k, 0.0);
  Matrix post(k, n), recon(k, reps.cols());
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t w = 0; w < k; ++w) qw[w] += need[m] * q(m, w);
  for (std::size_t w = 0; w < k; ++w) {
    if (qw[w] <= 0.0) continue;
    for (std::size_t m = 0; m < n; ++m) {
      double const p = need[m] * q(m, w) / qw[w];
      post(w, m) = p;
      if (p == 0.0) continue;
      for (std::size_t u = 0; u < reps.cols(); ++u) recon(w, u) += p * reps(m, u);
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      double const mass = qw[a] + qw[b];
      if (!(mass > 0.0)) continue;
      double const wa = qw[a] / mass;
      double const lost_complexity = mass * js_nats(post.row(a), post.row(b), wa);
      double const lost_accuracy = mass * js_nats(recon.row(a), recon.row(b), wa);
      double const delta = (beta * lost_accuracy - lost_complexity) * kInvLn2;
      if (delta < best.delta_bits) best = {a, b, delta};
    }
  return best;
}

/// `sys` with word b folded into word a.
inline NamingSystem merge_words(NamingSystem const& sys, std::size_t a, std::size_t b) {
  auto const& q = sys.encoder();
  Matrix merged(q.rows(), q.cols() - 1);
  std::vector<std::string> labels;
  for (std::size_t w = 0, c = 0; w < q.cols(); ++w) {
    if (w == b) continue;
    for (std::size_t m = 0; m < q.rows(); ++m) merged(m, c) = q(m, w) + (w == a ? q(m, b) : 0.0);
    labels.push_back(sys.word_labels()[w]);
    ++c;
  }
  return NamingSystem::unchecked(std::move(merged), std::move(labels), sys.meaning_labels());
}

/// Greedily merges word pairs while a merge followed by re-solving does not
/// raise F_beta by more than the convergence tolerance. Fixed-point iteration
/// cannot leave a branch whose clusters only coalesce through a barrier, and
/// near a bifurcation it separates clusters by amounts below the tolerance.
inline FrontierPoint merge_search(MeaningSpace const& space, FrontierPoint point, SolverConfig const& config) {
  for (std::size_t guard = point.encoder.num_words(); guard > 1; --guard) {
    auto const cand = best_merge(space, point.beta, point.encoder.encoder());
    if (!(cand.delta_bits < config.convergence_tol)) break;
    FrontierPoint next = solve_at_beta(space, point.beta, merge_words(point.encoder, cand.a, cand.b), config);
    if (!(next.objective_bits <= point.objective_bits + config.convergence_tol) ||
        next.encoder.num_words() >= point.encoder.num_words())
      break;
    point = std::move(next);
  }
  return point;
}

/// Sequential refinement of the hard partition behind `q` (each meaning on
/// its most likely word) into at most `k` words: moves single meanings
/// between words while F_beta of the hard encoder drops. Lets a capped sweep
/// leave a partition that annealing alone keeps following.
inline Matrix refine_partition(MeaningSpace const& space, double beta, Matrix const& q, std::size_t k) {
  std::size_t const n = q.rows(), nu = space.representations().cols();
  auto const need = space.need().mass();
  auto const& reps = space.representations();
  std::vector<double> m0(nu, 0.0);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t u = 0; u < nu; ++u) m0[u] += need[m] * reps(m, u);

  std::vector<std::size_t> assign(n);
  for (std::size_t m = 0; m < n; ++m) {
    auto const row = q.row(m);
    assign[m] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) % k;
  }
  std::vector<double> mass(k, 0.0), sums(k * nu, 0.0);
  auto add = [&](std::size_t m, std::size_t c, double sign) {
    mass[c] += sign * need[m];
    for (std::size_t u = 0; u < nu; ++u) sums[c * nu + u] += sign * need[m] * reps(m, u);
  };
  for (std::size_t m = 0; m < n; ++m) add(m, assign[m], 1.0);
  // One word's share of F_beta in nats, with meaning m added (sign 1) or removed (-1).
  auto term = [&](std::size_t c, std::size_t m, double sign) {
    double const p = mass[c] + sign * need[m];
    if (!(p > 1e-300)) return 0.0;
    double f = -p * std::log(p);
    for (std::size_t u = 0; u < nu; ++u) {
      double const su = sums[c * nu + u] + sign * need[m] * reps(m, u);
      if (su > 0.0 && m0[u] > 0.0) f -= beta * su * std::log(su / (p * m0[u]));
    }
    return f;
  };
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool moved = false;
    for (std::size_t m = 0; m < n; ++m) {
      if (!(need[m] > 0.0)) continue;
      std::size_t const from = assign[m];
      double const leave = term(from, m, -1.0) - term(from, m, 0.0);
      std::size_t to = from;
      double best = -1e-12;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == from) continue;
        double const delta = leave + term(c, m, 1.0) - term(c, m, 0.0);
        if (delta < best) {
          best = delta;
          to = c;
        }
      }
      if (to == from) continue;
      add(m, from, -1.0);
      add(m, to, 1.0);
      assign[m] = to;
      moved = true;
    }
    if (!moved) break;
  }
  std::vector<std::size_t> column(k, k);
  std::size_t used = 0;
  for (std::size_t m = 0; m < n; ++m)
    if (column[assign[m]] == k) column[assign[m]] = used++;
  Matrix out(n, used);
  for (std::size_t m = 0; m < n; ++m) out(m, column[assign[m]]) = 1.0;
  return out;
}

/// Forces the cheapest merge and re-solves until at most `k` words remain.
/// Seeds capped sweeps from the uncapped solution, since a fixed starting
/// partition can follow a poor branch.
inline FrontierPoint reduce_words(MeaningSpace const& space, FrontierPoint point, std::size_t k,
                                  SolverConfig const& config) {
  while (point.encoder.num_words() > k) {
    auto const cand = best_merge(space, point.beta, point.encoder.encoder());
    point = solve_at_beta(space, point.beta, merge_words(point.encoder, cand.a, cand.b), config);
  }
  return point;
}

}  // namespace detail

namespace detail {

/// Re-solves each point from its neighbours' encoders and keeps any strict
/// improvement, sweeping both ways until nothing changes. A single sweep can
/// get trapped on a suboptimal branch when clusters are capped.
inline void polish_from_neighbors(MeaningSpace const& space, SolverConfig const& config,
                                  std::vector<FrontierPoint>& points) {
  std::size_t const n = points.size();
  if (n < 2) return;
  constexpr std::size_t kUntried = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> version(n, 0);
  // tried[i][0]: version of point i-1 last used to seed point i; [1]: of i+1.
  std::vector<std::array<std::size_t, 2>> tried(n, {kUntried, kUntried});
  for (std::size_t i = 0; i < n; ++i) {
    if (config.direction == AnnealDirection::high_to_low && i + 1 < n) tried[i][1] = 0;
    if (config.direction == AnnealDirection::low_to_high && i > 0) tried[i][0] = 0;
  }
  auto attempt = [&](std::size_t i, std::size_t j, int side) {
    if (tried[i][side] == version[j]) return false;
    tried[i][side] = version[j];
    FrontierPoint cand = solve_at_beta(space, points[i].beta, points[j].encoder, config);
    if (!(cand.objective_bits < points[i].objective_bits - config.convergence_tol)) return false;
    points[i] = std::move(cand);
    ++version[i];
    return true;
  };
  for (int pass = 0; pass < 64; ++pass) {
    bool changed = false;
    for (std::size_t i = 1; i < n; ++i) changed |= attempt(i, i - 1, 0);
    for (std::size_t i = n - 1; i-- > 0;) changed |= attempt(i, i + 1, 1);
    if (!changed) break;
  }
}

}  // namespace detail

/// Sweeps the grid in the configured direction, warm-starting each beta from
/// the previous solution. Each beta also tries `restarts` perturbed starts, a
/// smoothed copy of the best encoder, column splits when sweeping upward with
/// spare words, and merges of word pairs. With a word cap below the number of
/// meanings, the uncapped frontier reduced to the cap and a refined hard
/// partition are tried as well. Finally every point is re-solved from its
/// neighbours until nothing improves.
inline Frontier anneal_frontier(MeaningSpace const& space, SolverConfig const& config) {
  if (auto issues = config.validate(); !issues.empty()) throw ValidationError(std::move(issues));
  if (auto issues = validate_meaning_space(space); !issues.empty()) throw ValidationError(std::move(issues));
  (void)space.need();

  std::size_t const n = space.num_meanings();
  std::size_t const k = config.max_clusters == 0 ? n : std::min(config.max_clusters, n);
  auto const& grid = config.beta_grid;

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.direction == AnnealDirection::high_to_low) std::reverse(order.begin(), order.end());

  Frontier out;
  out.space_fingerprint = fingerprint(space);
  out.config = config;
  out.points.resize(grid.size());

  std::vector<FrontierPoint> uncapped;
  if (k < n) {
    SolverConfig free = config;
    free.max_clusters = 0;
    uncapped = anneal_frontier(space, free).points;
  }

  NamingSystem warm = initial_encoder(space, k);
  if (k < n) {
    CounterRng rng(config.seed, ~std::uint64_t{0}, 0);
    warm = NamingSystem::create(detail::perturb(warm.encoder(), rng), warm.word_labels(), warm.meaning_labels());
  }
  auto keep_better = [](FrontierPoint& best, FrontierPoint cand, double tol) {
    if (cand.objective_bits < best.objective_bits - tol) best = std::move(cand);
  };
  for (std::size_t idx : order) {
    double const beta = grid[idx];
    NamingSystem const start = warm;
    FrontierPoint best = solve_at_beta(space, beta, start, config);
    auto try_split = [&](Matrix const& q, std::size_t w) {
      Matrix split = detail::split_column(space, q, w);
      if (split.rows() == 0) return;
      std::vector<std::size_t> ids(split.cols());
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      auto init = NamingSystem::create(std::move(split), detail::word_ids_to_labels(ids), space.meaning_labels());
      keep_better(best, solve_at_beta(space, beta, init, config), config.convergence_tol);
    };
    if (config.direction == AnnealDirection::low_to_high && start.num_words() < k) {
      for (std::size_t w = 0; w < start.num_words(); ++w) try_split(start.encoder(), w);
    }
    for (int r = 1; r <= config.restarts; ++r) {
      CounterRng rng(config.seed, idx, static_cast<std::uint64_t>(r));
      auto init = NamingSystem::create(detail::perturb(start.encoder(), rng), start.word_labels(),
                                       start.meaning_labels());
      FrontierPoint cand = solve_at_beta(space, beta, init, config);
      if (cand.objective_bits < best.objective_bits) best = std::move(cand);
    }
    if (best.encoder.num_words() > 1 && detail::has_zero(best.encoder.encoder())) {
      auto init = NamingSystem::unchecked(detail::smooth(best.encoder.encoder(), kSmoothing),
                                          best.encoder.word_labels(), best.encoder.meaning_labels());
      keep_better(best, solve_at_beta(space, beta, init, config), config.convergence_tol);
    }
    if (k < n) {
      keep_better(best, detail::reduce_words(space, uncapped[idx], k, config), config.convergence_tol);
      Matrix hard = detail::refine_partition(space, beta, best.encoder.encoder(), k);
      std::vector<std::size_t> ids(hard.cols());
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      auto init = NamingSystem::create(detail::smooth(std::move(hard), kSmoothing), detail::word_ids_to_labels(ids),
                                       space.meaning_labels());
      keep_better(best, solve_at_beta(space, beta, init, config), config.convergence_tol);
    }
    best = detail::merge_search(space, std::move(best), config);
    warm = best.encoder;
    out.points[idx] = std::move(best);
  }
  detail::polish_from_neighbors(space, config, out.points);
  return out;
}

/// Checks that complexity and accuracy are non-decreasing in beta and that
/// accuracy is concave in complexity, both up to `slack` bits.
inline std::vector<std::string> validate_frontier(Frontier const& frontier, double slack = 1e-6) {
  std::vector<std::string> issues;
  auto const& pts = frontier.points;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    auto const& a = pts[i - 1];
    auto const& b = pts[i];
    if (!(b.beta > a.beta)) issues.push_back("points not sorted by beta at index " + std::to_string(i));
    if (b.complexity_bits < a.complexity_bits - slack)
      issues.push_back("complexity decreases at index " + std::to_string(i));
    if (b.accuracy_bits < a.accuracy_bits - slack) issues.push_back("accuracy decreases at index " + std::to_string(i));
  }
  for (std::size_t i = 2; i < pts.size(); ++i) {
    auto const& a = pts[i - 2];
    auto const& b = pts[i - 1];
    auto const& c = pts[i];
    double const span = c.complexity_bits - a.complexity_bits;
    if (!(span > 0.0)) continue;
    double const t = std::clamp((b.complexity_bits - a.complexity_bits) / span, 0.0, 1.0);
    double const chord = a.accuracy_bits + t * (c.accuracy_bits - a.accuracy_bits);
    if (b.accuracy_bits < chord - slack)
      issues.push_back("accuracy is not concave in complexity at index " + std::to_string(i - 1));
  }
  return issues;
}

/// Words with marginal mass strictly above `threshold`.
inline std::size_t effective_category_count(FrontierPoint const& point, double threshold = kCategoryMassThreshold) {
  return static_cast<std::size_t>(
      std::count_if(point.word_mass.begin(), point.word_mass.end(), [&](double x) { return x > threshold; }));
}

/// Most accurate frontier point with exactly `k` effective categories;
/// ties go to the smaller beta.
inline FrontierPoint const& select_most_informative_with_k(Frontier const& frontier, std::size_t k,
                                                           double threshold = kCategoryMassThreshold) {
  if (frontier.points.empty()) throw ValidationError("frontier is empty");
  FrontierPoint const* best = nullptr;
  std::vector<std::size_t> available;
  for (auto const& p : frontier.points) {
    auto const count = effective_category_count(p, threshold);
    if (std::find(available.begin(), available.end(), count) == available.end()) available.push_back(count);
    if (count != k) continue;
    if (best == nullptr || p.accuracy_bits > best->accuracy_bits) best = &p;
  }
  if (best == nullptr) {
    std::sort(available.begin(), available.end());
    std::string list;
    for (auto a : available) list += (list.empty() ? "" : ",") + std::to_string(a);
    throw ValidationError("no frontier point has k=" + std::to_string(k) + " categories; available k: " + list);
  }
  return *best;
}

}  // namespace ibf
