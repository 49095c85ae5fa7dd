#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cstoc/grid.hpp"
#include "cstoc/solvers.hpp"
#include "cstoc/specfile.hpp"

using namespace cstoc;

namespace {

struct Fixture {
  std::string drift = "u1";
  std::string diffusion = "0";
  std::string reward = "x1";
  std::string constraint;       // empty: no [constraint] section
  std::string controls = "lo = -1\nhi = 1\n";
  std::string dynamics_extra;   // e.g. "horizon = 0.5\n" / "log_step = true\n"
  std::string objective_extra;  // e.g. "discount = 0.5\n"
  std::string domain;           // body of the [domain] section
};

ProblemSpec make_spec(const Fixture& fx) {
  std::string text = "[dynamics]\ndrift = \"" + fx.drift + "\"\ndiffusion = \"" +
                     fx.diffusion + "\"\n" + fx.dynamics_extra + "[objective]\nreward = \"" +
                     fx.reward + "\"\n" + fx.objective_extra;
  if (!fx.constraint.empty()) {
    text += "[constraint]\nconstraint = \"" + fx.constraint + "\"\n";
  }
  text += "[controls]\n" + fx.controls;
  if (!fx.domain.empty()) text += "[domain]\n" + fx.domain;
  return parse_problem_text(text, "solver.toml");
}

HamiltonianParams hp(int u_res) {
  HamiltonianParams p;
  p.u_res = u_res;
  return p;
}

double max_abs_error(const ValueField& f, double (*exact)(double t, double x)) {
  double worst = 0.0;
  for (int it = 0; it <= f.grid.nt(); ++it) {
    for (int ix = 0; ix < f.grid.nx(); ++ix) {
      worst = std::max(worst,
                       std::abs(f.at(it, ix) - exact(f.grid.time.time(it), f.grid.x.at(ix))));
    }
  }
  return worst;
}

/// m-monotonicity and the mask-is-a-down-set invariant, over every node.
void check_m_monotone(const ValueField& f) {
  for (int it = 0; it <= f.grid.nt(); ++it) {
    for (int ix = 0; ix < f.grid.nx(); ++ix) {
      for (int j = 0; j + 1 < f.grid.nm(); ++j) {
        REQUIRE(f.at(it, ix, j) <= f.at(it, ix, j + 1) + 1e-12);
        if (f.is_masked(it, ix, j + 1)) REQUIRE(f.is_masked(it, ix, j));
      }
    }
  }
}

}  // namespace

TEST_CASE("a zero constraint has a zero floor") {
  Fixture fx;
  fx.constraint = "0";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 20), Axis{-1.0, 1.0, 21});
  const ValueField v = solve_constraint_floor(spec, grid, hp(3));
  CHECK(v.meta.equation == "constraint_floor");
  CHECK(v.meta.discount == 0.0);
  double worst = 0.0;
  for (double x : v.value) worst = std::max(worst, std::abs(x));
  CHECK(worst == 0.0);
}

TEST_CASE("a deterministic floor tracks the downward drive") {
  Fixture fx;
  fx.constraint = "x1";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 40), Axis{-2.0, 2.0, 81});
  SolverOptions opts;
  opts.lateral = LateralBoundary::Extrapolate;
  const ValueField v = solve_constraint_floor(spec, grid, hp(3), opts);
  // inf over u in [-1,1] of E[X_T] drives at full speed down: v = x - (T-t).
  const double worst = max_abs_error(v, [](double t, double x) { return x - (1.0 - t); });
  CHECK(worst <= 1e-9);           // linear solution: the upwind scheme is exact
  CHECK(worst <= 2.0 * grid.h_x());  // the documented bound

  // The metadata-driven extraction recovers the minimizing control.
  const PolicyField pol = extract_policy(spec, v);
  for (int it = 0; it < grid.nt(); ++it) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      REQUIRE(pol.defined[pol.node(it, ix)] == 1);
      REQUIRE(pol.u_at(it, ix)[0] == -1.0);
    }
  }
}

TEST_CASE("the probability floor matches the normal tail") {
  Fixture fx;
  fx.diffusion = "1";
  fx.constraint = "indicator_leq0(x1)";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-4.0, 4.0, 161});
  const ValueField v = solve_constraint_floor(spec, grid, hp(3));
  const double phi_m1 = 0.5 * std::erfc(1.0 / std::sqrt(2.0));  // P(N(1,1) <= 0)
  CHECK(std::abs(v.at(0, 80) - phi_m1) <= 0.02);
  // Probabilities stay probabilities under the monotone scheme.
  for (double x : v.value) {
    REQUIRE(x >= -1e-12);
    REQUIRE(x <= 1.0 + 1e-12);
  }
}

TEST_CASE("the unconstrained linear fixture is solved exactly") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 1\n";
  fx.diffusion = "1";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 20), Axis{-2.0, 2.0, 41});
  SolverOptions opts;
  opts.lateral = LateralBoundary::Extrapolate;
  const SolveResult r = solve_unconstrained(spec, grid, hp(11), opts);
  const double worst = max_abs_error(r.value, [](double t, double x) { return x + (1.0 - t); });
  CHECK(worst <= 1e-9);
  CHECK(r.value.meta.equation == "unconstrained");
  CHECK(r.value.meta.u_resolution == 11);
  CHECK(r.value.meta.lateral == "extrapolate");
  CHECK(r.value.meta.substeps == 6);  // ceil(0.05 * 110 / 0.95)
  // The drift term is worth dt * u per step, so u* = 1 everywhere.
  for (int it = 0; it < grid.nt(); ++it) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      REQUIRE(r.policy.defined[r.policy.node(it, ix)] == 1);
      REQUIRE(r.policy.u_at(it, ix)[0] == 1.0);
    }
  }
}

TEST_CASE("the constrained cap is piecewise linear in the budget") {
  Fixture fx;
  fx.constraint = "x1";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 50), Axis{-2.0, 2.0, 81},
                               Axis{-0.6, 1.65, 46});
  SolverOptions opts;
  opts.mask_margin = 0.02;
  const SolveResult r = solve_expectation_constrained(spec, grid, hp(21), opts);
  const ValueField& V = r.value;
  CHECK(V.meta.equation == "expectation_constrained");

  // V(0, 0, m) = min(m, 1): the reward equals the constrained quantity, so
  // the budget caps it below 1 and reachability caps it at 1.
  const int ix0 = 40;  // x = 0
  const int probes[] = {2, 12, 17, 22, 30, 42};  // m = -0.5, 0, 0.25, 0.5, 0.9, 1.5
  for (int j : probes) {
    const double m = grid.m->at(j);
    CHECK(std::abs(V.at(0, ix0, j) - std::min(m, 1.0)) <= 0.05);
  }

  // Nodes below the floor v(t,x) = x - (T-t) minus the margin are masked.
  const ValueField vfloor = solve_constraint_floor(spec, Grid::make(grid.time, grid.x),
                                                   hp(21), opts);
  for (int it = 0; it <= grid.nt(); ++it) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      for (int j = 0; j < grid.nm(); ++j) {
        REQUIRE(V.is_masked(it, ix, j) == (grid.m->at(j) < vfloor.at(it, ix) - 0.02));
      }
    }
  }
  CHECK(V.is_masked(0, 70, 18));  // x=1.5, m=0.3 < v=0.5 minus margin
  // Queries below the mask rest on the lowest feasible level.
  CHECK(field_value(V, 0.0, 1.5, 0.3) == V.at(0, 70, V.lowest_unmasked(0, 70)));
  // A slack budget leaves holding still optimal, and holding is exact.
  CHECK(V.at(0, 70, 42) == 1.5);  // x=1.5, m=1.5

  check_m_monotone(V);

  // Passing the floor in reproduces the solve bit-for-bit.
  const SolveResult r2 = solve_expectation_constrained(spec, grid, hp(21), opts, &vfloor);
  CHECK(r2.value.value == V.value);
  CHECK(r2.value.masked == V.masked);
}

TEST_CASE("the top budget slice matches the unconstrained solve") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 1\n";
  fx.diffusion = "1";
  fx.constraint = "0";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 20), Axis{-2.0, 2.0, 41}, Axis{0.0, 1.0, 6});
  SolverOptions opts;
  opts.lateral = LateralBoundary::Extrapolate;
  const SolveResult con = solve_expectation_constrained(spec, grid, hp(11), opts);
  const SolveResult unc = solve_unconstrained(spec, Grid::make(grid.time, grid.x), hp(11), opts);
  CHECK(con.value.meta.substeps == unc.value.meta.substeps);

  const int top = grid.nm() - 1;
  double worst = 0.0;
  for (int it = 0; it <= grid.nt(); ++it) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      REQUIRE_FALSE(con.value.is_masked(it, ix, top));
      worst = std::max(worst, std::abs(con.value.at(it, ix, top) - unc.value.at(it, ix)));
    }
  }
  CHECK(worst <= 1e-10);             // same stencil family, different summation order
  CHECK(worst <= 2.0 * grid.h_x());  // the documented bound
  check_m_monotone(con.value);
}

TEST_CASE("pointwise-ordered terminal data keeps the solves ordered") {
  Fixture lo_fx, hi_fx;
  lo_fx.controls = hi_fx.controls = "lo = 0\nhi = 1\n";
  lo_fx.diffusion = hi_fx.diffusion = "1";
  lo_fx.reward = "x1";
  hi_fx.reward = "x1 + 0.5";
  lo_fx.constraint = hi_fx.constraint = "0";
  const ProblemSpec lo_spec = make_spec(lo_fx);
  const ProblemSpec hi_spec = make_spec(hi_fx);
  const Grid flat = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{-2.0, 2.0, 21});
  const Grid cube = Grid::make(flat.time, flat.x, Axis{0.0, 1.0, 4});
  SolverOptions opts;
  opts.penalty_level = 30.0;  // comparisons are exact only at a shared level

  auto expect_ordered = [](const ValueField& a, const ValueField& b) {
    REQUIRE(a.value.size() == b.value.size());
    for (std::size_t k = 0; k < a.value.size(); ++k) {
      REQUIRE(a.value[k] <= b.value[k] + 1e-12);
    }
  };
  expect_ordered(solve_unconstrained(lo_spec, flat, hp(5), opts).value,
                 solve_unconstrained(hi_spec, flat, hp(5), opts).value);
  expect_ordered(solve_state_constrained(lo_spec, flat, hp(5), opts).value,
                 solve_state_constrained(hi_spec, flat, hp(5), opts).value);
  expect_ordered(solve_expectation_constrained(lo_spec, cube, hp(5), opts).value,
                 solve_expectation_constrained(hi_spec, cube, hp(5), opts).value);

  // The analogue for the floor: a pointwise-larger constraint lifts it.
  Fixture glo, ghi;
  glo.diffusion = ghi.diffusion = "1";
  glo.constraint = "x1";
  ghi.constraint = "x1 + 0.5";
  expect_ordered(solve_constraint_floor(make_spec(glo), flat, hp(5), opts),
                 solve_constraint_floor(make_spec(ghi), flat, hp(5), opts));
}

TEST_CASE("an absent domain reduces the state-constrained equation") {
  Fixture fx;
  fx.diffusion = "1";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{-1.0, 1.0, 21});
  const SolveResult bar = solve_state_constrained(spec, grid, hp(5));
  const SolveResult unc = solve_unconstrained(spec, grid, hp(5));
  CHECK(bar.value.value == unc.value.value);
  CHECK(bar.value.masked == unc.value.masked);
  CHECK(bar.policy.u == unc.policy.u);
  CHECK(bar.value.meta.equation == "state_constrained");

  Fixture cfx;
  cfx.diffusion = "1";
  cfx.reward = "2.5";
  const SolveResult flat = solve_state_constrained(make_spec(cfx), grid, hp(5));
  for (double v : flat.value.value) REQUIRE(std::abs(v - 2.5) <= 1e-12);
}

TEST_CASE("geometric growth on a log axis") {
  Fixture fx;
  fx.drift = "u1*x1";
  fx.diffusion = "x1";
  fx.controls = "lo = 0\nhi = 1\n";
  fx.dynamics_extra = "log_step = true\n";
  fx.domain = "delta = \"x1\"\nkind = \"halfspace\"\nnormal = 1\noffset = 0\n";
  const ProblemSpec spec = make_spec(fx);
  // The axis must reach well past 3 log-units: the e^z weighting makes the
  // value carried by paths that touch the upper edge heavy enough to show.
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 25), Axis{-4.0, 4.0, 161});
  const SolveResult r = solve_state_constrained(spec, grid, hp(11));
  CHECK(r.value.meta.log_x);
  // u = 1 throughout gives E[X_T] = x * e^(T-t); at x = 1 the value is e.
  const int iz0 = 80;  // z = 0, x = 1
  CHECK(std::abs(r.value.at(0, iz0) - std::exp(1.0)) <= 0.05);
  for (double v : r.value.value) REQUIRE(!is_neg_inf(v));  // grid lies inside O
  CHECK(field_value(r.value, 0.0, 1.0) == r.value.at(0, iz0));  // query in x, not log x
  CHECK(r.policy.u_at(0, iz0)[0] == 1.0);
  CHECK(r.policy.u_at(12, iz0)[0] == 1.0);
}

TEST_CASE("the discount damps the value at the exact exponential-Euler rate") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 0\n";
  fx.objective_extra = "discount = 0.5\n";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 50), Axis{0.0, 2.0, 5});
  const SolveResult r = solve_unconstrained(spec, grid, hp(1));
  CHECK(r.value.meta.discount == 0.5);
  // Frozen dynamics: each step multiplies by (1 - rho dt) exactly.
  CHECK(r.value.at(0, 4) == doctest::Approx(2.0 * std::pow(0.99, 50)).epsilon(1e-12));
  CHECK(std::abs(r.value.at(0, 4) - 2.0 * std::exp(-0.5)) <= 0.01);
}

TEST_CASE("strict CFL mode reports the admissible step") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 0\n";
  fx.diffusion = "1";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{0.0, 1.0, 101});
  SolverOptions opts;
  opts.strict_cfl = true;
  bool threw = false;
  try {
    solve_unconstrained(spec, grid, hp(1), opts);
  } catch (const CflError& e) {
    threw = true;
    CHECK(e.admissible_dt > 0.0);
    CHECK(e.admissible_dt < grid.h_t());
    CHECK(e.admissible_dt == doctest::Approx(0.95 / 10000.0));
    CHECK(std::string(e.what()).find("admissible") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("serial and threaded sweeps agree bit-for-bit") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 1\n";
  fx.diffusion = "1";
  fx.constraint = "0";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{-1.0, 1.0, 21}, Axis{0.0, 1.0, 4});
  SolverOptions par, ser;
  ser.parallel = false;
  const SolveResult a = solve_expectation_constrained(spec, grid, hp(5), par);
  const SolveResult b = solve_expectation_constrained(spec, grid, hp(5), ser);
  CHECK(a.value.value == b.value.value);
  CHECK(a.value.masked == b.value.masked);
  CHECK(a.policy.u == b.policy.u);
  CHECK(a.policy.a == b.policy.a);
  CHECK(a.policy.defined == b.policy.defined);

  const Grid flat = Grid::make(grid.time, grid.x);
  const SolveResult c = solve_unconstrained(spec, flat, hp(5), par);
  const SolveResult d = solve_unconstrained(spec, flat, hp(5), ser);
  CHECK(c.value.value == d.value.value);
  CHECK(c.policy.u == d.policy.u);
}

TEST_CASE("extraction reproduces the recorded policy on mask-free fields") {
  // Pure-state equation.
  Fixture fx;
  fx.controls = "lo = 0\nhi = 1\n";
  fx.diffusion = "1";
  const ProblemSpec spec = make_spec(fx);
  const Grid flat = Grid::make(TimeGrid(0.0, 1.0, 20), Axis{-2.0, 2.0, 41});
  SolverOptions opts;
  opts.lateral = LateralBoundary::Extrapolate;
  const SolveResult unc = solve_unconstrained(spec, flat, hp(11), opts);
  const PolicyField pol = extract_policy(spec, unc.value, opts);
  CHECK(pol.u == unc.policy.u);
  CHECK(pol.defined == unc.policy.defined);

  // Constrained equation (g == 0 keeps every node feasible).
  Fixture cfx = fx;
  cfx.constraint = "0";
  const ProblemSpec cspec = make_spec(cfx);
  const Grid cube = Grid::make(flat.time, flat.x, Axis{0.0, 1.0, 6});
  const SolveResult con = solve_expectation_constrained(cspec, cube, hp(11), opts);
  const PolicyField cpol = extract_policy(cspec, con.value, opts);
  CHECK(cpol.u == con.policy.u);
  CHECK(cpol.a == con.policy.a);
  CHECK(cpol.defined == con.policy.defined);

  // A singleton control set leaves no choice.
  Fixture sfx;
  sfx.controls = "lo = 0\nhi = 0\n";
  const ProblemSpec sspec = make_spec(sfx);
  const Grid small = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{0.0, 1.0, 11});
  const SolveResult sres = solve_unconstrained(sspec, small, hp(1));
  const PolicyField spol = extract_policy(sspec, sres.value);
  for (int it = 0; it < small.nt(); ++it) {
    for (int ix = 0; ix < small.nx(); ++ix) {
      REQUIRE(spol.defined[spol.node(it, ix)] == 1);
      REQUIRE(spol.u_at(it, ix)[0] == 0.0);
    }
  }
}

TEST_CASE("the drive-to-zero policy points at the origin") {
  Fixture fx;
  fx.reward = "0 - x1*x1";
  fx.dynamics_extra = "horizon = 0.5\n";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 0.5, 25), Axis{-1.0, 1.0, 41});
  const SolveResult r = solve_unconstrained(spec, grid, hp(3));
  // Outside the parked region |x| <= T the minimand is strict: u* = -sign(x).
  for (int ix = 0; ix < grid.nx(); ++ix) {
    const double x = grid.x.at(ix);
    if (x >= 0.6) CHECK(r.policy.u_at(0, ix)[0] == -1.0);
    if (x <= -0.6) CHECK(r.policy.u_at(0, ix)[0] == 1.0);
  }
}

TEST_CASE("residuals vanish on a frozen field and track perturbations") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 0\n";
  fx.reward = "x1*x1 - 2";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{-1.0, 1.0, 21});
  const SolveResult r = solve_unconstrained(spec, grid, hp(1));
  for (int it = 0; it <= grid.nt(); ++it) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      const double x = grid.x.at(ix);
      REQUIRE(r.value.at(it, ix) == x * x - 2.0);
    }
  }
  const auto res = viscosity_residual(spec, hp(1), r.value, 5, 10);
  REQUIRE(res.has_value());
  CHECK(*res == 0.0);
  CHECK_FALSE(viscosity_residual(spec, hp(1), r.value, 0, 10).has_value());
  CHECK_FALSE(viscosity_residual(spec, hp(1), r.value, 5, 0).has_value());

  // V + 0.1 (T - t) shifts the residual by +0.1 (rho = 0).
  ValueField bumped = r.value;
  for (int it = 0; it <= grid.nt(); ++it) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      bumped.set(it, ix, 0, bumped.at(it, ix) + 0.1 * (1.0 - grid.time.time(it)));
    }
  }
  const auto res2 = viscosity_residual(spec, hp(1), bumped, 5, 10);
  REQUIRE(res2.has_value());
  CHECK(*res2 - *res == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("residuals shrink like the mesh on a curved fixture") {
  Fixture fx;
  fx.controls = "lo = 0\nhi = 1\n";
  fx.diffusion = "1";
  fx.reward = "0 - x1*x1";
  const ProblemSpec spec = make_spec(fx);

  auto windowed_max = [&](int nt, int nx) {
    const Grid grid = Grid::make(TimeGrid(0.0, 1.0, nt), Axis{-2.0, 2.0, nx});
    const SolveResult r = solve_unconstrained(spec, grid, hp(11));
    double worst = 0.0;
    int seen = 0;
    for (int it = nt / 4; it <= 3 * nt / 4; ++it) {
      for (int ix = nx / 4; ix <= 3 * nx / 4; ++ix) {
        const auto res = viscosity_residual(spec, hp(11), r.value, it, ix);
        if (!res.has_value()) continue;
        ++seen;
        worst = std::max(worst, std::abs(*res));
      }
    }
    REQUIRE(seen > 0);
    return worst;
  };
  const double coarse = windowed_max(20, 41);
  const double fine = windowed_max(40, 81);
  CHECK(fine > 0.0);
  CHECK(fine <= 0.9 * coarse);
}

TEST_CASE("rows outside the domain carry the unconstrained continuation") {
  Fixture fx;
  fx.diffusion = "0.5";
  fx.domain = "delta = \"x1\"\nkind = \"halfspace\"\nnormal = 1\noffset = 0\n";
  const ProblemSpec spec = make_spec(fx);
  const Grid grid = Grid::make(TimeGrid(0.0, 1.0, 20), Axis{-1.0, 2.0, 61}, Axis{0.0, 1.2, 7});
  const SolveResult r = solve_expectation_constrained(spec, grid, hp(11));
  const ValueField& V = r.value;
  CHECK(V.meta.mask_note.find("closure") != std::string::npos);

  const SolveResult unc = solve_unconstrained(spec, Grid::make(grid.time, grid.x), hp(11));
  const int ix_out = 10;  // x = -0.5, outside the closure of O
  for (int it = 0; it <= grid.nt(); ++it) {
    // Exit already certain: every budget level >= 1 holds the plain value.
    REQUIRE(V.at(it, ix_out, 6) == unc.value.at(it, ix_out));
    REQUIRE(V.at(it, ix_out, 5) == unc.value.at(it, ix_out));
    // Budgets below certainty minus the margin are infeasible there.
    REQUIRE(V.is_masked(it, ix_out, 2));
    REQUIRE(V.is_masked(it, ix_out, 0));
  }
  // Deep inside O the exit probability is tiny: m = 0 stays feasible.
  CHECK_FALSE(V.is_masked(0, 40, 0));  // x = 1
  check_m_monotone(V);

  // A stencil touching the masked band is reported inapplicable.
  CHECK_FALSE(viscosity_residual(spec, hp(11), V, 5, ix_out, 4).has_value());
}

TEST_CASE("solver input validation") {
  Fixture fx;
  fx.constraint = "x1";
  const ProblemSpec spec = make_spec(fx);
  const Grid flat = Grid::make(TimeGrid(0.0, 1.0, 10), Axis{-1.0, 1.0, 21});
  const Grid cube = Grid::make(flat.time, flat.x, Axis{0.0, 1.0, 4});

  // Axis expectations per equation.
  CHECK_THROWS_AS(solve_constraint_floor(spec, cube, hp(3)), SpecError);
  CHECK_THROWS_AS(solve_unconstrained(spec, cube, hp(3)), SpecError);
  CHECK_THROWS_AS(solve_expectation_constrained(spec, flat, hp(3)), SpecError);

  // Node budget.
  SolverOptions tiny;
  tiny.max_nodes = 10;
  bool threw = false;
  try {
    solve_unconstrained(spec, flat, hp(3), tiny);
  } catch (const SpecError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("budget") != std::string::npos);
  }
  CHECK(threw);

  // Only one-dimensional state problems run on the grid solvers.
  ProblemSpec wide = spec;
  wide.dim = 2;
  wide.drift = {Expression::constant(0.0), Expression::constant(0.0)};
  wide.diffusion = {{Expression::constant(0.0), Expression::constant(0.0)},
                    {Expression::constant(0.0), Expression::constant(0.0)}};
  CHECK_THROWS_AS(solve_unconstrained(wide, flat, hp(3)), SpecError);

  // The floor handed to the constrained solve must match it.
  const ValueField vfloor = solve_constraint_floor(spec, flat, hp(3));
  const Grid other = Grid::make(flat.time, Axis{-1.0, 1.0, 31}, *cube.m);
  CHECK_THROWS_AS(solve_expectation_constrained(spec, other, hp(3), {}, &vfloor), SpecError);
  const ValueField not_floor = solve_unconstrained(spec, flat, hp(3)).value;
  CHECK_THROWS_AS(solve_expectation_constrained(spec, cube, hp(3), {}, &not_floor), SpecError);

  // Extraction needs the solver-written metadata.
  ValueField stripped = vfloor;
  stripped.meta.u_resolution = 0;
  CHECK_THROWS_AS(extract_policy(spec, stripped), SpecError);
  ValueField mislabeled = solve_expectation_constrained(spec, cube, hp(3)).value;
  mislabeled.meta.equation = "unconstrained";
  CHECK_THROWS_AS(extract_policy(spec, mislabeled), SpecError);
}
