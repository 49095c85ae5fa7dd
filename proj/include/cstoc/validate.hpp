#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cstoc/problem.hpp"

namespace cstoc {

enum class CheckStatus { Pass, Warn, Fail };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double evidence = 0.0;   // the estimated constant / witness value
  std::string message;
};

/// Result of sampling-based hypothesis validation. Deterministic for a fixed
/// (spec, box, seed); `text()` is byte-stable.
struct ValidationReport {
  std::vector<CheckResult> checks;
  std::uint64_t seed = 0;
  int samples = 0;

  bool all_pass() const;
  bool any_fail() const;
  std::string text() const;
};

/// Sampling box for validation probes (defaults to [-1,1]^d when empty).
struct ValidationBox {
  std::vector<double> lo, hi;
};

/// Estimates Lipschitz quotients of mu and sigma, linear-growth quotients of
/// the coefficients, quadratic-growth quotients of f and g, and checks the
/// sign convention of delta, all by seeded sampling over `box`. Structural
/// problems (T <= 0, empty controls, dimension mismatches) throw SpecError.
/// Growth/Lipschitz findings are warnings, not failures: they are sampled
/// estimates of analytic hypotheses.
ValidationReport validate_problem(const ProblemSpec& spec, const ValidationBox& box,
                                  std::uint64_t seed, int samples = 400);

}  // namespace cstoc
