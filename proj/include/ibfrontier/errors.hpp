#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ibf {

/// Input failed one or more structural checks. `issues()` lists every
/// violation found, in the order it was detected.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  explicit ValidationError(std::string const& issue)
      : ValidationError(std::vector<std::string>{issue}) {}

  std::vector<std::string> const& issues() const noexcept { return issues_; }

 private:
  static std::string join(std::vector<std::string> const& issues) {
    std::string out;
    for (auto const& s : issues) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// KL term with p(u) > 0 where q(u) = 0.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A frontier was computed on a different meaning space than the one supplied.
class FingerprintMismatch : public ValidationError {
 public:
  FingerprintMismatch(std::string const& expected, std::string const& actual)
      : ValidationError("space fingerprint mismatch: frontier was computed on space " + expected + " but the supplied space is " +
                        actual + "; recompute the frontier with the same space and need"),
        expected_(expected),
        actual_(actual) {}

  std::string const& expected() const noexcept { return expected_; }
  std::string const& actual() const noexcept { return actual_; }

 private:
  std::string expected_;
  std::string actual_;
};

/// Iterative procedure gave up before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ibf
