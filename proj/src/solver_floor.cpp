#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "cstoc/solvers.hpp"
#include "solver_detail.hpp"

namespace cstoc {

namespace {

using detail::CoefTables;
using detail::SideStatus;
using detail::StateSweep;

enum class StateEq { Floor, Unconstrained, StateConstrained };

const char* equation_name(StateEq eq) {
  switch (eq) {
    case StateEq::Floor: return "constraint_floor";
    case StateEq::Unconstrained: return "unconstrained";
    default: return "state_constrained";
  }
}

PolicyField make_policy_shell(const Grid& grid, int u_dim, int a_dim) {
  PolicyField policy;
  policy.grid = grid;
  policy.u_dim = u_dim;
  policy.a_dim = a_dim;
  const std::size_t nodes = grid.total_nodes();
  policy.u.assign(nodes * static_cast<std::size_t>(u_dim), 0.0);
  policy.a.assign(nodes * static_cast<std::size_t>(a_dim), 0.0);
  policy.defined.assign(nodes, 0);
  return policy;
}

/// Backward sweep shared by the three pure-state equations.
ValueField run_state_equation(const ProblemSpec& spec, const Grid& grid,
                              const HamiltonianParams& params, const SolverOptions& opts,
                              StateEq eq, PolicyField* policy) {
  detail::check_solver_inputs(spec, grid, /*want_m=*/false, opts);
  params.validate();
  const int nx = grid.nx();
  const int nt = grid.nt();
  const double rho = eq == StateEq::Floor ? 0.0 : spec.discount;

  CoefTables tables = detail::make_coef_tables(spec, grid, params.u_res, grid.time.end());

  std::vector<std::uint8_t> dead;
  std::vector<SideStatus> sides;
  const std::uint8_t* dead_p = nullptr;
  const SideStatus* sides_p = nullptr;
  if (eq == StateEq::StateConstrained && spec.has_domain()) {
    dead = detail::outside_closure(spec, grid);
    sides = detail::classify_sides(spec, grid, true);
    dead_p = dead.data();
    sides_p = sides.data();
  }
  std::vector<std::uint8_t> absorbed;  // exit-probability floor rows pinned at 1
  if (eq == StateEq::Floor && spec.has_domain()) absorbed = detail::outside_closure(spec, grid);

  ValueField field = ValueField::zeros(grid);
  field.meta.equation = equation_name(eq);
  field.meta.truncation_A = params.A;
  field.meta.u_resolution = params.u_res;
  field.meta.a_resolution = params.a_res;
  field.meta.discount = rho;
  field.meta.mask_margin = detail::resolve_mask_margin(grid, opts);
  field.meta.lateral = opts.lateral == LateralBoundary::Clamp ? "clamp" : "extrapolate";
  field.meta.log_x = spec.log_step;
  if (eq == StateEq::StateConstrained && spec.has_domain()) {
    field.meta.mask_note = "nodes outside the closure of O, and nodes with no admissible "
                           "control there, are masked";
  }

  // Terminal slice.
  std::vector<double> cur(nx), nxt(nx);
  for (int ix = 0; ix < nx; ++ix) {
    const double xp = tables.xs_phys[ix];
    double v = 0.0;
    bool mask = false;
    switch (eq) {
      case StateEq::Floor:
        v = absorbed.empty() ? spec.eval_constraint(std::span<const double>(&xp, 1))
                             : (absorbed[ix] ? 1.0 : 0.0);
        break;
      case StateEq::Unconstrained:
        v = spec.eval_reward(std::span<const double>(&xp, 1));
        break;
      case StateEq::StateConstrained:
        if (dead_p != nullptr && dead_p[ix]) {
          mask = true;
        } else {
          v = spec.eval_reward(std::span<const double>(&xp, 1));
        }
        break;
    }
    if (mask) {
      field.set_masked(nt, ix, 0);
      cur[ix] = kNegInf;
    } else {
      if (!std::isfinite(v)) throw SpecError("terminal data is not finite on the grid");
      field.set(nt, ix, 0, v);
      cur[ix] = v;
    }
  }

  StateSweep sweep;
  sweep.coef = &tables;
  sweep.sides = sides_p;
  sweep.dead_cols = dead_p;
  sweep.h = grid.h_x();
  sweep.rho = rho;
  sweep.lateral = opts.lateral;
  sweep.maximize = eq != StateEq::Floor;

  std::vector<int> arg(nx, -1);
  int max_substeps = 1;
  detail::StepPlan plan = detail::plan_substeps(grid.h_t(), tables.rate + rho, opts.strict_cfl);

  for (int it = nt - 1; it >= 0; --it) {
    const double t_hi = grid.time.time(it + 1);
    if (tables.time_dependent) {
      // Rate can drift with t: plan each step against both endpoints.
      detail::refresh_coef_tables(spec, grid, grid.time.time(it), tables);
      const double rate_lo = tables.rate + rho;
      detail::refresh_coef_tables(spec, grid, t_hi, tables);
      plan = detail::plan_substeps(grid.h_t(), std::max(rate_lo, tables.rate + rho) * 1.05,
                                   opts.strict_cfl);
    }
    sweep.dt = plan.dt;
    max_substeps = std::max(max_substeps, plan.substeps);
    for (int s = 0; s < plan.substeps; ++s) {
      if (tables.time_dependent) {
        detail::refresh_coef_tables(spec, grid, t_hi - (s + 1) * plan.dt, tables);
      }
      int* arg_out = (s == 0 && policy != nullptr) ? arg.data() : nullptr;
      detail::sweep_state(sweep, cur.data(), nxt.data(), arg_out, opts.parallel);
      std::swap(cur, nxt);
      if (!absorbed.empty()) {
        for (int ix = 0; ix < nx; ++ix)
          if (absorbed[ix]) cur[ix] = 1.0;
      }
      if (arg_out != nullptr) {
        for (int ix = 0; ix < nx; ++ix) {
          const std::size_t node = policy->node(it, ix, 0);
          if (arg[ix] >= 0) {
            policy->defined[node] = 1;
            for (int c = 0; c < policy->u_dim; ++c)
              policy->u[node * policy->u_dim + c] = tables.upoints[arg[ix]][c];
          }
        }
      }
    }
    for (int ix = 0; ix < nx; ++ix) {
      if (is_neg_inf(cur[ix])) {
        field.set_masked(it, ix, 0);
      } else {
        field.set(it, ix, 0, cur[ix]);
      }
    }
  }

  field.meta.substeps = max_substeps;
  field.check_consistent();
  return field;
}

}  // namespace

ValueField solve_constraint_floor(const ProblemSpec& spec, const Grid& grid,
                                  const HamiltonianParams& params, const SolverOptions& opts) {
  return run_state_equation(spec, grid, params, opts, StateEq::Floor, nullptr);
}

SolveResult solve_unconstrained(const ProblemSpec& spec, const Grid& grid,
                                const HamiltonianParams& params, const SolverOptions& opts) {
  SolveResult result;
  PolicyField policy = make_policy_shell(grid, spec.control_dim(), 0);
  PolicyField* pol = opts.record_policy ? &policy : nullptr;
  result.value = run_state_equation(spec, grid, params, opts, StateEq::Unconstrained, pol);
  result.policy = std::move(policy);
  return result;
}

SolveResult solve_state_constrained(const ProblemSpec& spec, const Grid& grid,
                                    const HamiltonianParams& params,
                                    const SolverOptions& opts) {
  SolveResult result;
  PolicyField policy = make_policy_shell(grid, spec.control_dim(), 0);
  PolicyField* pol = opts.record_policy ? &policy : nullptr;
  result.value = run_state_equation(spec, grid, params, opts, StateEq::StateConstrained, pol);
  result.policy = std::move(policy);
  return result;
}

}  // namespace cstoc
