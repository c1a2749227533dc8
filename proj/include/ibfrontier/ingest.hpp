#pragma once

// Building meaning spaces, need distributions and naming systems from raw
// domain data: similarity judgments, naming counts and feature norms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ibfrontier/errors.hpp"
#include "ibfrontier/matrix.hpp"
#include "ibfrontier/probability.hpp"

namespace ibf {

struct SimilarityMatrix {
  Matrix values;
  std::vector<std::string> labels;

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (values.rows() != values.cols())
      issues.push_back("similarity matrix is " + std::to_string(values.rows()) + "x" + std::to_string(values.cols()) +
                       ", not square");
    if (labels.size() != values.rows())
      issues.push_back("similarity matrix has " + std::to_string(values.rows()) + " rows but " +
                       std::to_string(labels.size()) + " labels");
    if (!issues.empty()) return issues;
    for (std::size_t i = 0; i < values.rows(); ++i)
      for (std::size_t j = 0; j < values.cols(); ++j) {
        if (!std::isfinite(values(i, j))) {
          issues.push_back("similarity entry (" + labels[i] + ", " + labels[j] + ") is not finite");
        } else if (j > i && std::abs(values(i, j) - values(j, i)) > kProbabilityTolerance) {
          issues.push_back("similarity matrix is not symmetric at (" + labels[i] + ", " + labels[j] + ")");
        }
      }
    return issues;
  }
};

/// Naming responses for one condition (language x speaker group).
struct NamingCounts {
  struct Entry {
    std::string meaning;
    std::string word;
    double count = 0.0;
  };
  std::vector<Entry> entries;
  std::string condition;

  /// Meanings in order of first appearance.
  std::vector<std::string> meanings() const {
    std::vector<std::string> out;
    for (auto const& e : entries)
      if (std::find(out.begin(), out.end(), e.meaning) == out.end()) out.push_back(e.meaning);
    return out;
  }
};

struct FeatureTable {
  Matrix probabilities;  // p(u|c), classes x features
  std::vector<std::string> class_labels;
  std::vector<std::string> feature_labels;
  std::vector<double> familiarity;
};

struct SimilarityOptions {
  std::optional<double> gamma;  // default: 1 / population SD of the entries
  bool include_diagonal = true;
};

/// Population standard deviation of the similarity entries.
inline double similarity_sd(SimilarityMatrix const& simm, bool include_diagonal = true) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < simm.values.rows(); ++i)
    for (std::size_t j = 0; j < simm.values.cols(); ++j) {
      if (i == j && !include_diagonal) continue;
      sum += simm.values(i, j);
      ++n;
    }
  if (n == 0) return 0.0;
  double const mean = sum / static_cast<double>(n);
  for (std::size_t i = 0; i < simm.values.rows(); ++i)
    for (std::size_t j = 0; j < simm.values.cols(); ++j) {
      if (i == j && !include_diagonal) continue;
      sq += (simm.values(i, j) - mean) * (simm.values(i, j) - mean);
    }
  return std::sqrt(sq / static_cast<double>(n));
}

/// m_c(u) = softmax_u(gamma * sim(c, u)); the universe is the meaning set.
/// The result has no need attached.
inline MeaningSpace meaning_space_from_similarity(SimilarityMatrix const& simm, SimilarityOptions const& options = {}) {
  if (auto issues = simm.validate(); !issues.empty()) throw ValidationError(std::move(issues));
  double gamma = 0.0;
  if (options.gamma) {
    gamma = *options.gamma;
    if (!std::isfinite(gamma)) throw ValidationError("gamma must be finite");
  } else {
    double const sd = similarity_sd(simm, options.include_diagonal);
    if (!(sd > 0.0))
      throw ValidationError("similarity entries have zero standard deviation, so gamma = 1/SD is undefined; "
                            "set gamma explicitly");
    gamma = 1.0 / sd;
  }
  std::size_t const n = simm.values.rows();
  Matrix reps(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < n; ++u) top = std::max(top, gamma * simm.values(c, u));
    double total = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      reps(c, u) = std::exp(gamma * simm.values(c, u) - top);
      total += reps(c, u);
    }
    for (std::size_t u = 0; u < n; ++u) reps(c, u) /= total;
  }
  return MeaningSpace::create(std::move(reps), simm.labels, simm.labels);
}

/// q(w|m) = count(m, w) / total(m). Word columns follow first appearance;
/// rows follow `meaning_order` when given, otherwise first appearance.
inline NamingSystem naming_system_from_counts(NamingCounts const& counts,
                                              std::vector<std::string> const& meaning_order = {}) {
  std::vector<std::string> issues;
  auto const meanings = meaning_order.empty() ? counts.meanings() : meaning_order;
  std::map<std::string, std::size_t> meaning_index;
  for (std::size_t i = 0; i < meanings.size(); ++i) meaning_index.emplace(meanings[i], i);

  std::vector<std::string> words;
  std::map<std::string, std::size_t> word_index;
  for (auto const& e : counts.entries) {
    if (!std::isfinite(e.count) || e.count < 0.0)
      issues.push_back("count for (" + e.meaning + ", " + e.word + ") is negative or not finite");
    else if (e.count > 0.0 && word_index.emplace(e.word, words.size()).second)
      words.push_back(e.word);
    if (!meaning_index.contains(e.meaning)) issues.push_back("meaning '" + e.meaning + "' is not in the meaning set");
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  Matrix q(meanings.size(), words.size());
  for (auto const& e : counts.entries)
    if (e.count > 0.0) q(meaning_index.at(e.meaning), word_index.at(e.word)) += e.count;
  for (std::size_t m = 0; m < meanings.size(); ++m) {
    auto row = q.row(m);
    double const total = detail::sum_of(row);
    if (!(total > 0.0)) {
      issues.push_back("meaning '" + meanings[m] + "' has zero total count" +
                       (counts.condition.empty() ? "" : " in condition '" + counts.condition + "'"));
      continue;
    }
    for (double& x : row) x /= total;
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return NamingSystem::create(std::move(q), std::move(words), meanings);
}

/// Count-weighted word frequencies, aligned with the columns of
/// naming_system_from_counts(counts).
inline std::vector<double> empirical_word_frequency(NamingCounts const& counts) {
  std::vector<std::string> words;
  std::map<std::string, double> totals;
  double all = 0.0;
  for (auto const& e : counts.entries) {
    if (!(e.count > 0.0)) continue;
    if (!totals.contains(e.word)) words.push_back(e.word);
    totals[e.word] += e.count;
    all += e.count;
  }
  std::vector<double> out;
  for (auto const& w : words) out.push_back(totals[w] / all);
  return out;
}

struct MaxEntResult {
  std::vector<double> prior;
  double residual = 0.0;  // max |E_p[q(w|m)] - target(w)|
  int iterations = 0;
};

/// Maximum-entropy p(m) subject to sum_m p(m) q(w|m) = target(w), found by
/// damped iterative scaling on p(m) ∝ exp(sum_w lambda_w q(w|m)). Rows of q
/// sum to one, so the scaling constant is 1.
inline MaxEntResult max_entropy_prior(NamingSystem const& sys, std::vector<double> const& target,
                                      double tol = 1e-9, int max_iterations = 100000, double damping = 0.5) {
  std::size_t const n = sys.num_meanings(), k = sys.num_words();
  if (target.size() != k) throw DimensionError("target frequencies do not match the word count");
  for (std::size_t w = 0; w < k; ++w)
    if (!(target[w] > 0.0)) throw ValidationError("target frequency of word '" + sys.word_labels()[w] + "' is not positive");
  auto const& q = sys.encoder();

  std::vector<double> lambda(k, 0.0), p(n), expected(k);
  MaxEntResult out;
  for (int it = 0;; ++it) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < n; ++m) {
      double s = 0.0;
      for (std::size_t w = 0; w < k; ++w) s += lambda[w] * q(m, w);
      p[m] = s;
      top = std::max(top, s);
    }
    double total = 0.0;
    for (double& x : p) {
      x = std::exp(x - top);
      total += x;
    }
    for (double& x : p) x /= total;

    std::fill(expected.begin(), expected.end(), 0.0);
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t w = 0; w < k; ++w) expected[w] += p[m] * q(m, w);
    double residual = 0.0;
    for (std::size_t w = 0; w < k; ++w) residual = std::max(residual, std::abs(expected[w] - target[w]));

    if (residual < tol) {
      out.prior = p;
      out.residual = residual;
      out.iterations = it;
      return out;
    }
    if (it >= max_iterations)
      throw ConvergenceError("least-informative prior did not converge after " + std::to_string(max_iterations) +
                             " iterations (residual " + detail::format_number(residual) + ")");
    for (std::size_t w = 0; w < k; ++w) lambda[w] += damping * std::log(target[w] / expected[w]);
  }
}

/// Least-informative need: per-language max-ent priors matching each
/// language's word frequencies, averaged with equal weights, then
/// regularized by adding `epsilon` to every entry and renormalizing.
inline Distribution li_prior(std::vector<NamingCounts> const& languages, std::vector<std::string> const& meaning_order,
                             double epsilon = 0.001) {
  if (languages.empty()) throw ValidationError("least-informative prior needs at least one naming system");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be a finite non-negative number");
  auto const order = meaning_order.empty() ? languages.front().meanings() : meaning_order;
  std::vector<double> avg(order.size(), 0.0);
  for (auto const& lang : languages) {
    auto const sys = naming_system_from_counts(lang, order);
    auto const fit = max_entropy_prior(sys, empirical_word_frequency(lang));
    for (std::size_t m = 0; m < avg.size(); ++m) avg[m] += fit.prior[m] / static_cast<double>(languages.size());
  }
  double const total = 1.0 + epsilon * static_cast<double>(avg.size());
  for (double& x : avg) x = (x + epsilon) / total;
  return Distribution::create(std::move(avg), order);
}

/// Rows renormalized from p(u|c); need proportional to familiarity.
inline MeaningSpace meaning_space_from_features(FeatureTable const& table) {
  std::vector<std::string> issues;
  auto const& p = table.probabilities;
  if (table.class_labels.size() != p.rows())
    issues.push_back("feature table has " + std::to_string(p.rows()) + " rows but " +
                     std::to_string(table.class_labels.size()) + " class labels");
  if (table.feature_labels.size() != p.cols())
    issues.push_back("feature table has " + std::to_string(p.cols()) + " columns but " +
                     std::to_string(table.feature_labels.size()) + " feature labels");
  if (table.familiarity.size() != p.rows())
    issues.push_back("familiarity has " + std::to_string(table.familiarity.size()) + " scores for " +
                     std::to_string(p.rows()) + " classes");
  if (!issues.empty()) throw ValidationError(std::move(issues));

  Matrix reps = p;
  for (std::size_t c = 0; c < p.rows(); ++c) {
    auto row = reps.row(c);
    for (std::size_t u = 0; u < row.size(); ++u)
      if (!(row[u] >= 0.0 && row[u] <= 1.0))
        issues.push_back("p(u|c) for class '" + table.class_labels[c] + "', feature '" + table.feature_labels[u] +
                         "' is outside [0, 1]");
    double const total = detail::sum_of(row);
    if (!(total > 0.0)) {
      issues.push_back("class '" + table.class_labels[c] + "' has no nonzero feature probability");
      continue;
    }
    for (double& x : row) x /= total;
  }
  double fam_total = 0.0;
  for (std::size_t c = 0; c < table.familiarity.size(); ++c) {
    if (!(table.familiarity[c] >= 0.0) || !std::isfinite(table.familiarity[c]))
      issues.push_back("familiarity of '" + table.class_labels[c] + "' is negative or not finite");
    else
      fam_total += table.familiarity[c];
  }
  if (issues.empty() && !(fam_total > 0.0)) issues.emplace_back("familiarity scores sum to zero");
  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<double> need(table.familiarity);
  for (double& x : need) x /= fam_total;
  return MeaningSpace::create(std::move(reps), table.feature_labels, table.class_labels,
                              Distribution::create(std::move(need), table.class_labels));
}

struct UniformNeed {};
inline constexpr UniformNeed uniform_need{};

inline MeaningSpace attach_need(MeaningSpace const& space, Distribution const& need) {
  if (!need.labels().empty() && need.labels() != space.meaning_labels())
    throw ValidationError("need labels do not match the space's meaning labels");
  return space.with_need(need);
}

inline MeaningSpace attach_need(MeaningSpace const& space, UniformNeed) {
  return space.with_need(Distribution::uniform(space.num_meanings(), space.meaning_labels()));
}

}  // namespace ibf
