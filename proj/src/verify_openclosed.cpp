#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cstoc/simulate.hpp"
#include "cstoc/verify.hpp"
#include "verify_detail.hpp"

namespace cstoc {

namespace {

struct CandidateEstimate {
  double mean = -std::numeric_limits<double>::infinity();
  double se = 0.0;
  double kept_fraction = 0.0;
  bool usable = false;
};

/// Mean terminal reward over the paths of one candidate program that never
/// leave the closure (running distance stays >= 0 at every node).
CandidateEstimate closed_loop_estimate(const ProblemSpec& spec, const ProbePoint& pt,
                                       const ControlProgram& candidate, const TimeGrid& sg,
                                       const VerifyOptions& opts) {
  const long n = opts.n_paths;
  std::vector<double> reward(n, 0.0);
  std::vector<std::uint8_t> kept(n, 0);
  const MartingaleProgram none = MartingaleProgram::zero(spec.dim, 0.0);
  const double y0 = std::numeric_limits<double>::infinity();

#pragma omp parallel for schedule(static) if (opts.parallel)
  for (long p = 0; p < n; ++p) {
    const AugmentedPath path = simulate(spec, pt.t, pt.x, 0.0, y0, candidate, none, sg,
                                        opts.seed, static_cast<std::uint64_t>(p));
    if (path.divergent || path.terminal_y() < -1e-12) continue;
    kept[p] = 1;
    reward[p] = spec.eval_reward(path.terminal_x());
  }

  CandidateEstimate est;
  long k = 0;
  double sum = 0.0;
  for (long p = 0; p < n; ++p) {
    if (kept[p]) {
      ++k;
      sum += reward[p];
    }
  }
  est.kept_fraction = static_cast<double>(k) / static_cast<double>(n);
  if (k == 0) return est;
  est.mean = sum / static_cast<double>(k);
  double q = 0.0;
  for (long p = 0; p < n; ++p) {
    if (kept[p]) q += (reward[p] - est.mean) * (reward[p] - est.mean);
  }
  if (k > 1) est.se = std::sqrt(q / (static_cast<double>(k) - 1.0) / static_cast<double>(k));
  est.usable = true;
  return est;
}

}  // namespace

VerificationReport check_open_closed(const TestFixture& fixture, const VerifyOptions& opts) {
  if (!fixture.state_value || fixture.state_value->grid.m) {
    throw SpecError("the open-closed check needs the fixture's pure-state solved field");
  }
  if (fixture.spec.dim != 1) throw SpecError("verification fixtures are one-dimensional");
  if (fixture.spec.has_domain() && fixture.spec.feedback_hat.empty()) {
    throw SpecError("the open-closed check needs the invariant feedback law on the closure");
  }
  if (fixture.probes.empty()) throw SpecError("the open-closed check needs probe points");
  const ValueField& vbar = *fixture.state_value;

  // Candidate programs: the fixture's, plus the invariant feedback law.
  std::vector<ControlProgram> candidates = fixture.controls;
  if (!fixture.spec.feedback_hat.empty()) {
    candidates.push_back(ControlProgram::feedback(fixture.spec.feedback_hat,
                                                  fixture.spec.controls));
  }
  if (candidates.empty()) throw SpecError("the open-closed check needs candidate programs");

  VerificationReport rep;
  rep.name = "open_closed";
  rep.n_paths = opts.n_paths;
  rep.seed = opts.seed;
  rep.t = fixture.probes.front().t;
  rep.x = fixture.probes.front().x;

  double max_diff = 0.0;
  double se_at_max = 0.0;
  int probe_index = 0;
  for (const ProbePoint& pt : fixture.probes) {
    const std::string tag = "probe_" + std::to_string(probe_index++);
    const double grid_value = field_value(vbar, pt.t, pt.x[0]);
    rep.details.emplace_back(tag + "_x", pt.x[0]);
    rep.details.emplace_back(tag + "_grid", grid_value);

    // A probe on (or outside) the boundary has no closed-loop start; the
    // grid value above already is the one-sided extension, so record it and
    // leave the comparison to interior probes.
    if (fixture.spec.has_domain() && distance_to_complement(fixture.spec, pt.x) <= 0.0) {
      rep.details.emplace_back(tag + "_boundary", 1.0);
      continue;
    }

    const TimeGrid sg = detail::sim_grid(vbar, pt.t, fixture.spec.horizon);
    CandidateEstimate best;
    for (const ControlProgram& cand : candidates) {
      const CandidateEstimate est = closed_loop_estimate(fixture.spec, pt, cand, sg, opts);
      if (est.usable && est.mean > best.mean) best = est;
    }
    if (!best.usable) {
      rep.note = "no candidate stayed in the closure";
      return rep;
    }
    rep.details.emplace_back(tag + "_mc", best.mean);
    rep.details.emplace_back(tag + "_kept", best.kept_fraction);
    const double diff = std::abs(grid_value - best.mean);
    if (diff >= max_diff) {
      max_diff = diff;
      se_at_max = best.se;
    }
  }

  rep.estimate = max_diff;
  rep.se = se_at_max;
  rep.slack = opts.tol_open_closed - max_diff;
  rep.verdict = detail::verdict_from(rep.slack, rep.se,
                                     detail::grid_allowance(vbar, opts.grid_error_cells));
  if (!opts.class_r_ok) {
    rep.note = "class-R hypothesis unverified";
    rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

}  // namespace cstoc
