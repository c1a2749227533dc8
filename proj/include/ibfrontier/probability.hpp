#pragma once

// Probability objects shared by every stage: distributions, meaning spaces
// and naming systems. All are immutable once built.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ibfrontier/detail/logmath.hpp"
#include "ibfrontier/errors.hpp"
#include "ibfrontier/matrix.hpp"

namespace ibf {

/// Row sums may drift from 1 by at most this much; anything inside is
/// renormalized on construction.
inline constexpr double kProbabilityTolerance = 1e-9;

namespace detail {

inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline double sum_of(std::span<double const> xs) noexcept {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

/// Appends simplex violations for one vector. `what` names it in messages.
inline void check_simplex(std::span<double const> xs, std::string const& what,
                          std::vector<std::string>& issues) {
  bool finite = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) {
      issues.push_back(what + " has a non-finite entry at column " + std::to_string(i));
      finite = false;
    } else if (xs[i] < 0.0) {
      issues.push_back(what + " has negative entry " + format_number(xs[i]) + " at column " +
                       std::to_string(i));
    }
  }
  if (!finite) return;
  double const s = sum_of(xs);
  if (std::abs(s - 1.0) > kProbabilityTolerance) issues.push_back(what + " sums to " + format_number(s));
}

inline void check_unique(std::vector<std::string> const& labels, std::string const& what,
                         std::vector<std::string>& issues) {
  std::set<std::string> seen;
  for (auto const& l : labels)
    if (!seen.insert(l).second) issues.push_back("duplicate " + what + " label '" + l + "'");
}

/// Zeroes entries below kZeroMass, then divides by the sum; returns true
/// when anything changed.
inline bool renormalize(std::span<double> xs) noexcept {
  bool flushed = false;
  for (double& x : xs)
    if (x != 0.0 && is_zero_mass(x)) {
      x = 0.0;
      flushed = true;
    }
  double const s = sum_of(xs);
  // Sums within summation rounding of 1 are left alone.
  double const rounding = 2.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(xs.size());
  if (std::abs(s - 1.0) <= rounding) return flushed;
  for (double& x : xs) x /= s;
  return true;
}

}  // namespace detail

class Distribution {
 public:
  Distribution() = default;

  /// Validates, then renormalizes once if the sum is within tolerance of 1.
  static Distribution create(std::vector<double> mass, std::vector<std::string> labels = {}) {
    std::vector<std::string> issues;
    if (mass.empty()) issues.emplace_back("distribution is empty");
    if (!labels.empty() && labels.size() != mass.size())
      issues.push_back("distribution has " + std::to_string(mass.size()) + " entries but " +
                       std::to_string(labels.size()) + " labels");
    detail::check_simplex(mass, "distribution", issues);
    if (!issues.empty()) throw ValidationError(std::move(issues));
    Distribution d(std::move(mass), std::move(labels));
    d.renormalized_ = detail::renormalize(d.mass_);
    return d;
  }

  static Distribution unchecked(std::vector<double> mass, std::vector<std::string> labels = {}) {
    return {std::move(mass), std::move(labels)};
  }

  static Distribution uniform(std::size_t n, std::vector<std::string> labels = {}) {
    if (n == 0) throw ValidationError("uniform distribution needs at least one element");
    return create(std::vector<double>(n, 1.0 / static_cast<double>(n)), std::move(labels));
  }

  std::span<double const> mass() const noexcept { return mass_; }
  std::vector<std::string> const& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return mass_.size(); }
  double operator[](std::size_t i) const noexcept { return mass_[i]; }
  bool renormalized() const noexcept { return renormalized_; }

  friend bool operator==(Distribution const& a, Distribution const& b) {
    return a.mass_ == b.mass_ && a.labels_ == b.labels_;
  }

 private:
  Distribution(std::vector<double> mass, std::vector<std::string> labels)
      : mass_(std::move(mass)), labels_(std::move(labels)) {}

  std::vector<double> mass_;
  std::vector<std::string> labels_;
  bool renormalized_ = false;
};

class MeaningSpace;
std::vector<std::string> validate_meaning_space(MeaningSpace const& space);

/// Meanings as distributions m_c(u) over a feature universe, plus the need
/// distribution p(m). The need may be unset until `with_need` is called.
class MeaningSpace {
 public:
  MeaningSpace() = default;

  static MeaningSpace unchecked(Matrix representations, std::vector<std::string> universe_labels,
                                std::vector<std::string> meaning_labels,
                                std::optional<Distribution> need = std::nullopt) {
    MeaningSpace s;
    s.reps_ = std::move(representations);
    s.universe_labels_ = std::move(universe_labels);
    s.meaning_labels_ = std::move(meaning_labels);
    s.need_ = std::move(need);
    return s;
  }

  /// Validates every invariant (throwing all issues at once), renormalizes
  /// rows within tolerance and caches I(M;U) when a need is present.
  static MeaningSpace create(Matrix representations, std::vector<std::string> universe_labels,
                             std::vector<std::string> meaning_labels,
                             std::optional<Distribution> need = std::nullopt) {
    auto s = unchecked(std::move(representations), std::move(universe_labels), std::move(meaning_labels),
                       std::move(need));
    if (auto issues = validate_meaning_space(s); !issues.empty()) throw ValidationError(std::move(issues));
    for (std::size_t r = 0; r < s.reps_.rows(); ++r)
      if (detail::renormalize(s.reps_.row(r))) ++s.renormalized_rows_;
    if (s.need_ && s.need_->labels().empty())
      s.need_ = Distribution::create({s.need_->mass().begin(), s.need_->mass().end()}, s.meaning_labels_);
    s.cache_information();
    return s;
  }

  /// Same space with a different need; the representations are not rechecked.
  MeaningSpace with_need(Distribution need) const {
    if (need.size() != num_meanings())
      throw DimensionError("need has " + std::to_string(need.size()) + " entries but the space has " +
                           std::to_string(num_meanings()) + " meanings");
    MeaningSpace s = *this;
    if (need.labels().empty())
      need = Distribution::create({need.mass().begin(), need.mass().end()}, meaning_labels_);
    s.need_ = std::move(need);
    s.cache_information();
    return s;
  }

  Matrix const& representations() const noexcept { return reps_; }
  std::span<double const> representation(std::size_t meaning) const noexcept { return reps_.row(meaning); }
  std::vector<std::string> const& universe_labels() const noexcept { return universe_labels_; }
  std::vector<std::string> const& meaning_labels() const noexcept { return meaning_labels_; }
  std::size_t num_meanings() const noexcept { return reps_.rows(); }
  std::size_t num_universe() const noexcept { return reps_.cols(); }
  bool has_need() const noexcept { return need_.has_value(); }
  std::optional<Distribution> const& maybe_need() const noexcept { return need_; }

  Distribution const& need() const {
    if (!need_) throw ValidationError("meaning space has no need distribution attached");
    return *need_;
  }

  /// Prior representation m_0(u) = sum_m p(m) m(u).
  std::vector<double> prior_representation() const {
    auto const& p = need();
    std::vector<double> m0(num_universe(), 0.0);
    for (std::size_t m = 0; m < num_meanings(); ++m)
      for (std::size_t u = 0; u < num_universe(); ++u) m0[u] += p[m] * reps_(m, u);
    return m0;
  }

  /// I(M;U) in bits, the ceiling on any system's accuracy.
  double meaning_information() const {
    if (information_) return *information_;
    return compute_information();
  }

  std::size_t renormalized_rows() const noexcept { return renormalized_rows_; }

 private:
  double compute_information() const {
    auto const& p = need();
    auto const m0 = prior_representation();
    double sum = 0.0;
    for (std::size_t m = 0; m < num_meanings(); ++m) {
      if (detail::is_zero_mass(p[m])) continue;
      sum += p[m] * detail::kl_nats(reps_.row(m), m0);
    }
    return sum * detail::kInvLn2;
  }

  void cache_information() {
    information_.reset();
    if (need_) information_ = compute_information();
  }

  Matrix reps_;
  std::vector<std::string> universe_labels_;
  std::vector<std::string> meaning_labels_;
  std::optional<Distribution> need_;
  std::optional<double> information_;
  std::size_t renormalized_rows_ = 0;
};

inline std::vector<std::string> validate_meaning_space(MeaningSpace const& space) {
  std::vector<std::string> issues;
  auto const& reps = space.representations();
  if (reps.rows() == 0) issues.emplace_back("meaning space has no meanings");
  if (reps.cols() == 0) issues.emplace_back("meaning space has an empty universe");
  if (space.meaning_labels().size() != reps.rows())
    issues.push_back("meaning space has " + std::to_string(reps.rows()) + " rows but " +
                     std::to_string(space.meaning_labels().size()) + " meaning labels");
  if (space.universe_labels().size() != reps.cols())
    issues.push_back("meaning space has " + std::to_string(reps.cols()) + " columns but " +
                     std::to_string(space.universe_labels().size()) + " universe labels");
  detail::check_unique(space.meaning_labels(), "meaning", issues);
  detail::check_unique(space.universe_labels(), "universe", issues);
  for (std::size_t r = 0; r < reps.rows(); ++r) detail::check_simplex(reps.row(r), "row " + std::to_string(r), issues);
  if (auto const& need = space.maybe_need()) {
    if (need->size() != reps.rows())
      issues.push_back("need has " + std::to_string(need->size()) + " entries but the space has " +
                       std::to_string(reps.rows()) + " meanings");
    else if (!need->labels().empty() && need->labels() != space.meaning_labels())
      issues.emplace_back("need labels do not match the meaning labels");
    detail::check_simplex(need->mass(), "need", issues);
  }
  return issues;
}

class NamingSystem;
std::vector<std::string> validate_naming_system(NamingSystem const& sys);

/// Encoder q(w|m): one row per meaning, one column per word.
class NamingSystem {
 public:
  NamingSystem() = default;

  static NamingSystem unchecked(Matrix encoder, std::vector<std::string> word_labels,
                                std::vector<std::string> meaning_labels) {
    NamingSystem s;
    s.encoder_ = std::move(encoder);
    s.word_labels_ = std::move(word_labels);
    s.meaning_labels_ = std::move(meaning_labels);
    return s;
  }

  static NamingSystem create(Matrix encoder, std::vector<std::string> word_labels,
                             std::vector<std::string> meaning_labels) {
    auto s = unchecked(std::move(encoder), std::move(word_labels), std::move(meaning_labels));
    if (auto issues = validate_naming_system(s); !issues.empty()) throw ValidationError(std::move(issues));
    for (std::size_t r = 0; r < s.encoder_.rows(); ++r)
      if (detail::renormalize(s.encoder_.row(r))) ++s.renormalized_rows_;
    return s;
  }

  Matrix const& encoder() const noexcept { return encoder_; }
  std::vector<std::string> const& word_labels() const noexcept { return word_labels_; }
  std::vector<std::string> const& meaning_labels() const noexcept { return meaning_labels_; }
  std::size_t num_meanings() const noexcept { return encoder_.rows(); }
  std::size_t num_words() const noexcept { return encoder_.cols(); }
  std::size_t renormalized_rows() const noexcept { return renormalized_rows_; }

  friend bool operator==(NamingSystem const& a, NamingSystem const& b) {
    return a.encoder_ == b.encoder_ && a.word_labels_ == b.word_labels_ && a.meaning_labels_ == b.meaning_labels_;
  }

 private:
  Matrix encoder_;
  std::vector<std::string> word_labels_;
  std::vector<std::string> meaning_labels_;
  std::size_t renormalized_rows_ = 0;
};

/// Structural checks on the system alone: shape, labels, row-stochasticity.
inline std::vector<std::string> validate_naming_system(NamingSystem const& sys) {
  std::vector<std::string> issues;
  auto const& q = sys.encoder();
  if (q.rows() == 0) issues.emplace_back("naming system has no meanings");
  if (q.cols() == 0) issues.emplace_back("naming system has no words");
  if (sys.word_labels().size() != q.cols())
    issues.push_back("naming system has " + std::to_string(q.cols()) + " word columns but " +
                     std::to_string(sys.word_labels().size()) + " word labels");
  if (sys.meaning_labels().size() != q.rows())
    issues.push_back("naming system has " + std::to_string(q.rows()) + " rows but " +
                     std::to_string(sys.meaning_labels().size()) + " meaning labels");
  detail::check_unique(sys.word_labels(), "word", issues);
  for (std::size_t r = 0; r < q.rows(); ++r) detail::check_simplex(q.row(r), "row " + std::to_string(r), issues);
  return issues;
}

/// Checks the system and that its meanings line up with `space`, in order.
inline std::vector<std::string> validate_naming_system(NamingSystem const& sys, MeaningSpace const& space) {
  auto issues = validate_naming_system(sys);
  auto const& a = sys.meaning_labels();
  auto const& b = space.meaning_labels();
  if (a.size() != b.size()) {
    issues.push_back("naming system has " + std::to_string(a.size()) + " meanings but the space has " +
                     std::to_string(b.size()));
    return issues;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      issues.push_back("label mismatch at index " + std::to_string(i) + ": '" + a[i] + "' vs '" + b[i] + "'");
      break;
    }
  }
  return issues;
}

/// q(w) = sum_m p(m) q(w|m).
inline Distribution marginal_word_distribution(NamingSystem const& sys, Distribution const& need) {
  if (need.size() != sys.num_meanings())
    throw DimensionError("need has " + std::to_string(need.size()) + " entries but the system has " +
                         std::to_string(sys.num_meanings()) + " meanings");
  auto const& q = sys.encoder();
  std::vector<double> qw(q.cols(), 0.0);
  for (std::size_t m = 0; m < q.rows(); ++m)
    for (std::size_t w = 0; w < q.cols(); ++w) qw[w] += need[m] * q(m, w);
  return Distribution::create(std::move(qw), sys.word_labels());
}

/// Content hash of a space (representations, labels and need) as 16 hex digits.
inline std::string fingerprint(MeaningSpace const& space) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](void const* data, std::size_t n) {
    auto const* p = static_cast<unsigned char const*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_u64 = [&](std::uint64_t v) { mix_bytes(&v, sizeof v); };
  auto mix_doubles = [&](std::span<double const> xs) {
    mix_u64(xs.size());
    for (double x : xs) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      mix_u64(bits);
    }
  };
  auto mix_labels = [&](std::vector<std::string> const& ls) {
    mix_u64(ls.size());
    for (auto const& l : ls) {
      mix_u64(l.size());
      mix_bytes(l.data(), l.size());
    }
  };
  mix_u64(space.num_meanings());
  mix_u64(space.num_universe());
  mix_labels(space.meaning_labels());
  mix_labels(space.universe_labels());
  mix_doubles(space.representations().data());
  if (space.has_need()) mix_doubles(space.need().mass());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ibf
