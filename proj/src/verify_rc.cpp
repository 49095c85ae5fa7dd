#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cstoc/verify.hpp"
#include "verify_detail.hpp"

namespace cstoc {

VerificationReport check_right_continuity(const TestFixture& fixture, const ProbePoint& point,
                                          std::span<const double> deltas,
                                          const VerifyOptions& opts) {
  if (!fixture.value || !fixture.value->grid.m) {
    throw SpecError("the right-continuity check needs the budget-augmented solved field");
  }
  const ValueField& V = *fixture.value;
  if (!point.has_m) throw SpecError("the right-continuity check needs a budget coordinate");
  if (fixture.spec.has_domain() && fixture.spec.feedback_hat.empty()) {
    throw SpecError("the state-constraint variant needs the invariant feedback law");
  }

  static constexpr double kDefault[] = {0.2, 0.1, 0.05, 0.025};
  if (deltas.empty()) deltas = kDefault;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (deltas[k] <= 0.0 || (k > 0 && deltas[k] >= deltas[k - 1])) {
      throw SpecError("budget relaxations must be positive and strictly decreasing");
    }
  }

  VerificationReport rep;
  rep.name = "right_continuity";
  rep.t = point.t;
  rep.x = point.x;
  rep.m = point.m;
  rep.has_m = true;
  rep.seed = opts.seed;
  rep.delta = deltas.back();
  rep.has_delta = true;

  if (!fixture.spec.assumptions.f_bounded && !fixture.spec.assumptions.coeff_linear_growth) {
    rep.note = "inconclusive: assumptions unmet";
    return rep;
  }
  if (detail::rests_on_masked(V, point.t, point.x[0], point.m)) {
    throw SpecError("the probe point rests on masked data");
  }

  const double base = field_value(V, point.t, point.x[0], point.m);
  std::vector<double> gaps(deltas.size());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    gaps[k] = field_value(V, point.t, point.x[0], point.m + deltas[k]) - base;
    rep.details.emplace_back("delta_" + std::to_string(k), deltas[k]);
    rep.details.emplace_back("gap_" + std::to_string(k), gaps[k]);
  }

  const double allowance = detail::grid_allowance(V, opts.grid_error_cells);
  double slack = opts.tol_rc - gaps.back();
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
    slack = std::min(slack, gaps[k] - gaps[k + 1] + allowance);
  }
  rep.estimate = gaps.back();
  rep.se = 0.0;
  rep.slack = slack;
  rep.verdict = slack >= 0.0 ? Verdict::Pass : Verdict::Fail;
  return rep;
}

}  // namespace cstoc
