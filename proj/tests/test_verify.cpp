#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cstoc/grid.hpp"
#include "cstoc/solvers.hpp"
#include "cstoc/specfile.hpp"
#include "cstoc/verify.hpp"

using namespace cstoc;

namespace {

ProblemSpec parse(const std::string& text) { return parse_problem_text(text, "verify.toml"); }

HamiltonianParams hp(int u_res) {
  HamiltonianParams p;
  p.u_res = u_res;
  return p;
}

/// f = g = x, drift u in [-1,1], sigma = 0: the deterministic budget fixture.
TestFixture deterministic_fixture() {
  TestFixture fx;
  fx.spec = parse(
      "[dynamics]\ndrift = \"u1\"\ndiffusion = \"0\"\n[objective]\nreward = \"x1\"\n"
      "[constraint]\nconstraint = \"x1\"\n[controls]\nlo = -1\nhi = 1\n");
  const Grid grid =
      Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-2.0, 2.0, 41}, Axis{-0.6, 1.6, 23});
  fx.value = solve_expectation_constrained(fx.spec, grid, hp(5)).value;
  return fx;
}

/// Same reward/constraint with sigma = 0.2; the pathwise-dominating
/// martingale loading 0.2 keeps M(T) - g(X_T) constant on every path.
TestFixture stochastic_fixture() {
  TestFixture fx;
  fx.spec = parse(
      "[dynamics]\ndrift = \"u1\"\ndiffusion = \"0.2\"\n[objective]\nreward = \"x1\"\n"
      "[constraint]\nconstraint = \"x1\"\n[controls]\nlo = -1\nhi = 1\n");
  const Grid grid =
      Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-2.0, 2.0, 81}, Axis{-1.0, 2.0, 31});
  fx.value = solve_expectation_constrained(fx.spec, grid, hp(5)).value;
  return fx;
}

ControlProgram const_u(const TestFixture& fx, double u) {
  return ControlProgram::constant({u}, fx.spec.controls);
}

MartingaleProgram const_a(double a, double bound) {
  return MartingaleProgram::constant({a}, bound);
}

}  // namespace

TEST_CASE("upper inequality: degenerate stopping times") {
  const TestFixture fx = deterministic_fixture();
  VerifyOptions opts;
  opts.n_paths = 2000;
  const ProbePoint pt = ProbePoint::budget(0.0, 0.0, 0.5);
  const ControlProgram nu = const_u(fx, 0.5);
  const MartingaleProgram alpha = MartingaleProgram::zero(1, 2.0);

  // Stopping immediately compares the shifted field against the plan value.
  const VerificationReport now =
      check_dpp_upper(fx, pt, nu, alpha, TauRule::immediate(), opts);
  CHECK(now.verdict == Verdict::Pass);
  CHECK(now.se == 0.0);  // sigma = 0 and constant loading: zero variance
  CHECK(now.slack >= 0.0);
  CHECK(now.n_paths == 2000);

  // Stopping at the horizon compares the terminal slice against itself.
  const VerificationReport end =
      check_dpp_upper(fx, pt, nu, alpha, TauRule::terminal(), opts);
  CHECK(end.verdict == Verdict::Pass);
  CHECK(std::abs(end.slack) <= 1e-12);
  CHECK(end.se == 0.0);
}

TEST_CASE("upper inequality: diffusive fixture with a first-exit time") {
  const TestFixture fx = stochastic_fixture();
  VerifyOptions opts;
  opts.n_paths = 100000;
  opts.seed = 7;
  const ProbePoint pt = ProbePoint::budget(0.0, 0.0, 0.5);
  const ControlProgram nu = const_u(fx, 0.3);
  const MartingaleProgram alpha = const_a(0.2, 2.0);
  const TauRule tau = TauRule::first_exit(PathRegion::x_box({-0.4}, {0.4}));

  const VerificationReport rep = check_dpp_upper(fx, pt, nu, alpha, tau, opts);
  CHECK(rep.verdict == Verdict::Pass);
  CHECK(rep.slack >= -3.0 * rep.se);
  CHECK(rep.note.empty());

  // Same seed, same bytes; a different seed moves the estimate.
  const VerificationReport again = check_dpp_upper(fx, pt, nu, alpha, tau, opts);
  CHECK(again.to_text() == rep.to_text());
  opts.seed = 8;
  const VerificationReport moved = check_dpp_upper(fx, pt, nu, alpha, tau, opts);
  CHECK(moved.estimate != rep.estimate);
}

TEST_CASE("upper inequality: empirically inadmissible plan") {
  const TestFixture fx = deterministic_fixture();
  VerifyOptions opts;
  opts.n_paths = 500;
  const VerificationReport rep =
      check_dpp_upper(fx, ProbePoint::budget(0.0, 0.0, 0.5), const_u(fx, 1.0),
                      MartingaleProgram::zero(1, 2.0), TauRule::terminal(), opts);
  CHECK(rep.verdict == Verdict::Inconclusive);
  CHECK(rep.note == "inadmissible input");
  bool found = false;
  for (const auto& [key, value] : rep.details) {
    if (key == "mean_g") {
      found = true;
      CHECK(value == doctest::Approx(1.0));
    }
  }
  CHECK(found);
}

TEST_CASE("lower inequality: slack behavior in the relaxation") {
  const TestFixture fx = deterministic_fixture();
  VerifyOptions opts;
  opts.n_paths = 1000;
  const ProbePoint pt = ProbePoint::budget(0.0, 0.0, 0.5);
  const ControlProgram nu = const_u(fx, 0.5);
  const MartingaleProgram alpha = MartingaleProgram::zero(1, 2.0);

  // tau = t: reduces to budget monotonicity plus the one-cell shift.
  const VerificationReport now =
      check_dpp_lower(fx, pt, 0.05, nu, alpha, TauRule::immediate(), opts);
  CHECK(now.verdict == Verdict::Pass);
  CHECK(now.slack >= 0.0);
  CHECK(now.se == 0.0);

  // Intermediate fixed time, a plan the probe's own budget could not afford.
  const VerificationReport mid =
      check_dpp_lower(fx, pt, 0.05, const_u(fx, 0.8), alpha, TauRule::fixed_time(0.5), opts);
  CHECK(mid.verdict == Verdict::Pass);

  // The no-relaxation probe is stronger than required and says so.
  const VerificationReport tight =
      check_dpp_lower(fx, pt, 0.0, nu, alpha, TauRule::immediate(), opts);
  CHECK(tight.verdict == Verdict::Pass);
  CHECK(tight.note.find("stronger") != std::string::npos);
  CHECK(tight.has_delta);
  CHECK(tight.delta == 0.0);

  // Slack is nondecreasing in the relaxation width.
  double prev = -1e300;
  for (double delta : {0.0, 0.05, 0.2}) {
    const VerificationReport r =
        check_dpp_lower(fx, pt, delta, const_u(fx, 0.5), alpha, TauRule::fixed_time(0.5), opts);
    CHECK(r.slack >= prev - 1e-12);
    prev = r.slack;
  }
}

TEST_CASE("lower inequality: stopping in the masked region is flagged") {
  const TestFixture fx = deterministic_fixture();
  VerifyOptions opts;
  opts.n_paths = 200;
  // Driving to x = 1 strands every path far below the floor at the horizon.
  const VerificationReport rep =
      check_dpp_lower(fx, ProbePoint::budget(0.0, 0.0, -0.2), 0.05, const_u(fx, 1.0),
                      MartingaleProgram::zero(1, 2.0), TauRule::terminal(), opts);
  CHECK(rep.verdict == Verdict::Inconclusive);
  CHECK(rep.note == "invariance violated");

  // A probe that itself rests on masked data is a usage error.
  CHECK_THROWS_AS(check_dpp_lower(fx, ProbePoint::budget(0.0, 1.5, 0.0), 0.05,
                                  const_u(fx, 0.0), MartingaleProgram::zero(1, 2.0),
                                  TauRule::immediate(), opts),
                  SpecError);
}

TEST_CASE("right continuity: slack constraint and a diffusive probe") {
  // Far above every achievable constraint value the gaps sit on the plateau.
  const TestFixture det = deterministic_fixture();
  const VerificationReport flat =
      check_right_continuity(det, ProbePoint::budget(0.0, 0.0, 1.4));
  CHECK(flat.verdict == Verdict::Pass);
  CHECK(std::abs(flat.estimate) <= 0.01);
  CHECK(flat.details.size() == 8);  // four (delta, gap) pairs

  // Probability-of-failure budget fixture: gaps shrink into tolerance.
  TestFixture prob;
  prob.spec = parse(
      "[dynamics]\ndrift = \"u1\"\ndiffusion = \"1\"\n[objective]\nreward = \"x1\"\n"
      "[constraint]\nconstraint = \"indicator_leq0(x1)\"\n[controls]\nlo = -1\nhi = 1\n");
  const Grid grid =
      Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-4.0, 4.0, 81}, Axis{0.0, 1.0, 21});
  prob.value = solve_expectation_constrained(prob.spec, grid, hp(3)).value;
  const VerificationReport rc =
      check_right_continuity(prob, ProbePoint::budget(0.0, 0.5, 0.3));
  CHECK(rc.verdict == Verdict::Pass);
  CHECK(rc.estimate <= 0.05);
  // Recorded gaps are nonincreasing as the relaxation shrinks.
  std::vector<double> gaps;
  for (const auto& [key, value] : rc.details) {
    if (key.rfind("gap_", 0) == 0) gaps.push_back(value);
  }
  REQUIRE(gaps.size() == 4);
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) CHECK(gaps[k + 1] <= gaps[k] + 1e-12);
}

TEST_CASE("right continuity: assumption gate and feedback requirement") {
  TestFixture fx = deterministic_fixture();
  fx.spec.assumptions.f_bounded = false;
  fx.spec.assumptions.coeff_linear_growth = false;
  const VerificationReport rep =
      check_right_continuity(fx, ProbePoint::budget(0.0, 0.0, 0.5));
  CHECK(rep.verdict == Verdict::Inconclusive);
  CHECK(rep.note.find("assumptions unmet") != std::string::npos);

  // The state-constraint variant insists on the invariant feedback law.
  TestFixture dom = deterministic_fixture();
  dom.spec.domain = DomainSpec{};
  dom.spec.domain->delta = Expression::parse("x1");
  dom.spec.domain->kind = DomainKind::HalfSpace;
  dom.spec.domain->normal = {1.0};
  dom.spec.domain->offset = 0.0;
  CHECK_THROWS_AS(check_right_continuity(dom, ProbePoint::budget(0.0, 0.5, 0.5)), SpecError);
}

TEST_CASE("open vs closed: unconstrained reduction") {
  TestFixture fx;
  fx.spec = parse(
      "[dynamics]\ndrift = \"u1\"\ndiffusion = \"1\"\n[objective]\nreward = \"x1\"\n"
      "[controls]\nlo = 0\nhi = 1\n");
  // The terminal law is N(1,1); the axis has to hold its tails or the
  // truncated value flux shows up as a spurious open-closed gap.
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-5.0, 7.0, 121});
  fx.state_value = solve_state_constrained(fx.spec, grid, hp(5)).value;
  fx.controls.push_back(const_u(fx, 1.0));
  fx.probes.push_back(ProbePoint::state(0.0, 0.0));
  VerifyOptions opts;
  opts.n_paths = 20000;
  const VerificationReport rep = check_open_closed(fx, opts);
  CHECK(rep.verdict == Verdict::Pass);
  CHECK(rep.estimate <= 0.05);
  bool kept_all = false;
  for (const auto& [key, value] : rep.details) {
    if (key == "probe_0_kept") kept_all = value == 1.0;
  }
  CHECK(kept_all);
}

TEST_CASE("open vs closed: geometric growth on the positive half-line") {
  TestFixture fx;
  fx.spec = parse(
      "[dynamics]\ndrift = \"u1*x1\"\ndiffusion = \"x1\"\nlog_step = true\n"
      "[objective]\nreward = \"x1\"\n[controls]\nlo = 0\nhi = 1\n"
      "[domain]\ndelta = \"x1\"\nkind = \"halfspace\"\nnormal = 1\noffset = 0\n"
      "feedback_hat = \"0\"\n");
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-4.0, 4.0, 161});
  fx.state_value = solve_state_constrained(fx.spec, grid, hp(11)).value;
  fx.controls.push_back(const_u(fx, 1.0));
  fx.controls.push_back(const_u(fx, 0.5));
  fx.probes.push_back(ProbePoint::state(0.0, 1.0));
  fx.probes.push_back(ProbePoint::state(0.0, 0.5));
  VerifyOptions opts;
  opts.n_paths = 50000;
  opts.seed = 11;

  const VerificationReport rep = check_open_closed(fx, opts);
  CHECK(rep.verdict == Verdict::Pass);
  CHECK(rep.estimate <= 0.1);

  // The boundary-audit flag demotes the verdict but keeps the numbers.
  opts.class_r_ok = false;
  const VerificationReport demoted = check_open_closed(fx, opts);
  CHECK(demoted.verdict == Verdict::Inconclusive);
  CHECK(demoted.note.find("class-R") != std::string::npos);
  CHECK(demoted.estimate == rep.estimate);
}

TEST_CASE("report serialization round-trips the headline numbers") {
  VerificationReport rep;
  rep.name = "demo";
  rep.t = 0.25;
  rep.x = {1.5};
  rep.m = 0.5;
  rep.has_m = true;
  rep.estimate = 2.5;
  rep.se = 0.125;
  rep.slack = -0.0625;
  rep.verdict = Verdict::Fail;
  rep.n_paths = 77;
  rep.seed = 42;
  rep.delta = 0.05;
  rep.has_delta = true;
  rep.note = "demo note";
  rep.details.emplace_back("lhs", 1.0);
  const std::string text = rep.to_text();
  for (const char* needle :
       {"\"name\": \"demo\"", "\"verdict\": \"fail\"", "\"seed\": 42", "\"n_paths\": 77",
        "\"estimate\": 2.5", "\"se\": 0.125", "\"slack\": -0.0625", "\"delta\": 0.05",
        "\"lhs\": 1.0", "\"m\": 0.5", "\"t\": 0.25"}) {
    CHECK(text.find(needle) != std::string::npos);
  }
  CHECK(verdict_name(Verdict::Pass) == "pass");
  CHECK(verdict_name(Verdict::Inconclusive) == "inconclusive");
}
