#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cstoc/simulate.hpp"
#include "cstoc/verify.hpp"
#include "verify_detail.hpp"

namespace cstoc {

namespace detail {

int resolve_tau_node(const AugmentedPath& path, const TauRule& tau) {
  const int last = path.grid.steps();
  StepContext ctx;
  ctx.grid = &path.grid;
  ctx.step = last;
  ctx.dim = path.dim;
  ctx.X = {path.X.data(), static_cast<std::size_t>(last + 1) * path.dim};
  ctx.M = {path.M.data(), static_cast<std::size_t>(last + 1)};
  ctx.Y = {path.Y.data(), static_cast<std::size_t>(last + 1)};
  const int node = tau.resolve(ctx);
  return node < 0 ? last : std::min(node, last);
}

bool rests_on_masked(const ValueField& field, double t, double x, double m) {
  const Grid& g = field.grid;
  const double zq = field.meta.log_x ? (x > 0.0 ? std::log(x) : g.x.lo) : x;
  const int ix0 = g.x.cell(zq);
  const double rel = (t - g.time.start()) / g.time.dt();
  const int it0 = std::clamp(static_cast<int>(std::floor(rel)), 0, g.nt() - 1);
  for (int it : {it0, it0 + 1}) {
    for (int ix : {ix0, ix0 + 1}) {
      if (g.m) {
        const int j = g.m->cell(m);
        if (field.is_masked(it, ix, j) || field.is_masked(it, ix, j + 1)) return true;
      } else if (field.is_masked(it, ix, 0)) {
        return true;
      }
    }
  }
  return false;
}

double grid_allowance(const ValueField& field, double cells) {
  double h = field.grid.h_x();
  if (field.grid.m) h = std::max(h, field.grid.h_m());
  return cells * h;
}

Verdict verdict_from(double slack, double se, double allowance) {
  if (slack < -(3.0 * se + allowance)) return Verdict::Fail;
  if (se > std::max(std::abs(slack), allowance)) return Verdict::Inconclusive;
  return Verdict::Pass;
}

TimeGrid sim_grid(const ValueField& field, double t, double horizon) {
  const double span = horizon - t;
  const int steps =
      std::max(1, static_cast<int>(std::lround(span / field.grid.time.dt())));
  return TimeGrid(t, horizon, steps);
}

}  // namespace detail

namespace {

struct PathStats {
  std::vector<double> phi;      // field query at the stopped point, shifted
  std::vector<double> f_term;   // f(X_T)
  std::vector<double> g_term;   // g(X_T)
  std::vector<double> m_term;   // M(T)
  std::vector<std::uint8_t> stopped_masked;
  std::vector<std::uint8_t> divergent;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  // A zero-spread sample (degenerate dynamics) must report exactly zero
  // error; the accumulated mean can be an ulp off the common value, which
  // would leave a spurious residue in the deviation pass.
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) {
    r.mean = *lo;
    return r;
  }
  double s = 0.0;
  for (double e : v) s += e;
  r.mean = s / static_cast<double>(v.size());
  double q = 0.0;
  for (double e : v) q += (e - r.mean) * (e - r.mean);
  if (v.size() > 1) {
    r.se = std::sqrt(q / (static_cast<double>(v.size()) - 1.0) /
                     static_cast<double>(v.size()));
  }
  return r;
}

/// Simulates the batch once and collects everything both inequality sides
/// need; `m_shift_cells` moves the field query that many budget cells.
PathStats run_batch(const TestFixture& fx, const ValueField& field, const ProbePoint& pt,
                    const ControlProgram& nu, const MartingaleProgram& alpha,
                    const TauRule& tau, int m_shift_cells, const VerifyOptions& opts) {
  const long n = opts.n_paths;
  PathStats st;
  st.phi.assign(n, 0.0);
  st.f_term.assign(n, 0.0);
  st.g_term.assign(n, 0.0);
  st.m_term.assign(n, 0.0);
  st.stopped_masked.assign(n, 0);
  st.divergent.assign(n, 0);
  const TimeGrid sg = detail::sim_grid(field, pt.t, fx.spec.horizon);
  const double shift = field.grid.m ? m_shift_cells * field.grid.h_m() : 0.0;
  const double y0 = std::numeric_limits<double>::infinity();

#pragma omp parallel for schedule(static) if (opts.parallel)
  for (long p = 0; p < n; ++p) {
    const AugmentedPath path = simulate(fx.spec, pt.t, pt.x, pt.m, y0, nu, alpha, sg,
                                        opts.seed, static_cast<std::uint64_t>(p));
    if (path.divergent) {
      st.divergent[p] = 1;
      continue;
    }
    st.f_term[p] = fx.spec.eval_reward(path.terminal_x());
    st.g_term[p] = fx.spec.eval_constraint(path.terminal_x());
    st.m_term[p] = path.terminal_m();
    const int node = detail::resolve_tau_node(path, tau);
    const double ts = sg.time(node);
    const double xs = path.x(node)[0];
    const double ms = path.M[node];
    st.stopped_masked[p] = detail::rests_on_masked(field, ts, xs, ms) ? 1 : 0;
    st.phi[p] = field_value(field, ts, xs, ms + shift);
  }
  return st;
}

const ValueField& budget_field(const TestFixture& fx, const char* who) {
  if (!fx.value || fx.value->meta.equation != "expectation_constrained" || !fx.value->grid.m) {
    throw SpecError(std::string(who) + " needs the fixture's budget-augmented solved field");
  }
  if (fx.spec.dim != 1) throw SpecError("verification fixtures are one-dimensional");
  return *fx.value;
}

VerificationReport base_report(std::string name, const ProbePoint& pt,
                               const VerifyOptions& opts) {
  VerificationReport r;
  r.name = std::move(name);
  r.t = pt.t;
  r.x = pt.x;
  r.m = pt.m;
  r.has_m = pt.has_m;
  r.n_paths = opts.n_paths;
  r.seed = opts.seed;
  return r;
}

long count(const std::vector<std::uint8_t>& v) {
  long c = 0;
  for (auto b : v) c += b;
  return c;
}

}  // namespace

VerificationReport check_dpp_upper(const TestFixture& fixture, const ProbePoint& point,
                                   const ControlProgram& nu, const MartingaleProgram& alpha,
                                   const TauRule& tau, const VerifyOptions& opts) {
  const ValueField& V = budget_field(fixture, "the upper inequality check");
  if (!point.has_m) throw SpecError("the upper inequality check needs a budget coordinate");
  VerificationReport rep = base_report("dpp_upper", point, opts);

  const PathStats st = run_batch(fixture, V, point, nu, alpha, tau, +1, opts);
  const long bad = count(st.divergent);
  if (bad > 0) {
    rep.note = "divergent paths in the sample";
    rep.details.emplace_back("divergent_paths", static_cast<double>(bad));
    return rep;
  }

  // Empirical admissibility certificate for (nu, alpha) at the probe.
  const MeanSe g = mean_se(st.g_term);
  long dominated = 0;
  for (std::size_t p = 0; p < st.g_term.size(); ++p) {
    if (st.m_term[p] >= st.g_term[p] - 1e-9 * (1.0 + std::abs(st.m_term[p]))) ++dominated;
  }
  const long violations = static_cast<long>(st.g_term.size()) - dominated;
  rep.details.emplace_back("mean_g", g.mean);
  rep.details.emplace_back("se_g", g.se);
  rep.details.emplace_back("martingale_violations", static_cast<double>(violations));
  if (g.mean > point.m + 2.0 * g.se + 1e-12 || violations > 0) {
    rep.note = "inadmissible input";
    return rep;
  }

  long masked = 0;
  std::vector<double> diff(st.phi.size());
  for (std::size_t p = 0; p < st.phi.size(); ++p) {
    if (is_neg_inf(st.phi[p])) ++masked;
    diff[p] = st.phi[p] - st.f_term[p];
  }
  if (masked > 0) {
    rep.note = "stopped points with no feasible budget level";
    rep.details.emplace_back("masked_queries", static_cast<double>(masked));
    return rep;
  }

  const MeanSe d = mean_se(diff);
  const MeanSe lhs = mean_se(st.f_term);
  rep.estimate = lhs.mean + d.mean;  // E[phi at the stopped point]
  rep.se = d.se;
  rep.slack = d.mean;
  rep.details.emplace_back("reward_side", lhs.mean);
  rep.details.emplace_back("reward_side_se", lhs.se);
  rep.verdict =
      detail::verdict_from(rep.slack, rep.se, detail::grid_allowance(V, opts.grid_error_cells));
  return rep;
}

VerificationReport check_dpp_lower(const TestFixture& fixture, const ProbePoint& point,
                                   double delta, const ControlProgram& nu,
                                   const MartingaleProgram& alpha, const TauRule& tau,
                                   const VerifyOptions& opts) {
  const ValueField& V = budget_field(fixture, "the lower inequality check");
  if (!point.has_m) throw SpecError("the lower inequality check needs a budget coordinate");
  if (delta < 0.0) throw SpecError("the budget relaxation must be nonnegative");
  if (detail::rests_on_masked(V, point.t, point.x[0], point.m)) {
    throw SpecError("the probe point rests on masked data");
  }
  VerificationReport rep = base_report("dpp_lower", point, opts);
  rep.delta = delta;
  rep.has_delta = true;
  if (delta == 0.0) rep.note = "stronger-than-required probe: no budget relaxation";

  const PathStats st = run_batch(fixture, V, point, nu, alpha, tau, -1, opts);
  const long bad = count(st.divergent);
  if (bad > 0) {
    rep.note = "divergent paths in the sample";
    rep.details.emplace_back("divergent_paths", static_cast<double>(bad));
    rep.verdict = Verdict::Inconclusive;
    return rep;
  }

  const long masked = count(st.stopped_masked);
  const double frac = static_cast<double>(masked) / static_cast<double>(opts.n_paths);
  rep.details.emplace_back("stopped_masked_fraction", frac);
  if (frac > 1e-3) {
    rep.note = "invariance violated";
    return rep;
  }

  const MeanSe phi = mean_se(st.phi);
  const double lhs = field_value(V, point.t, point.x[0], point.m + delta);
  rep.estimate = phi.mean;
  rep.se = phi.se;
  rep.slack = lhs - phi.mean;
  rep.details.emplace_back("relaxed_value", lhs);
  rep.verdict =
      detail::verdict_from(rep.slack, rep.se, detail::grid_allowance(V, opts.grid_error_cells));
  return rep;
}

}  // namespace cstoc
