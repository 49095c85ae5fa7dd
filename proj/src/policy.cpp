#include <algorithm>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "cstoc/policy_bridge.hpp"
#include "cstoc/solvers.hpp"
#include "solver_detail.hpp"

namespace cstoc {

namespace {

using detail::CoefTables;
using detail::MStencil;

LateralBoundary lateral_from_meta(const FieldMetadata& meta) {
  return meta.lateral == "extrapolate" ? LateralBoundary::Extrapolate
                                       : LateralBoundary::Clamp;
}

PolicyField policy_shell(const Grid& grid, int u_dim, int a_dim) {
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

PolicyField extract_state(const ProblemSpec& spec, const ValueField& field,
                          const SolverOptions& opts) {
  const Grid& grid = field.grid;
  const FieldMetadata& meta = field.meta;
  const bool floor_eq = meta.equation == "constraint_floor";
  const bool state_eq = meta.equation == "state_constrained";

  CoefTables tables =
      detail::make_coef_tables(spec, grid, meta.u_resolution, grid.time.end());
  std::vector<std::uint8_t> dead;
  std::vector<detail::SideStatus> sides;
  detail::StateSweep sweep;
  sweep.coef = &tables;
  if (state_eq && spec.has_domain()) {
    dead = detail::outside_closure(spec, grid);
    sides = detail::classify_sides(spec, grid, true);
    sweep.dead_cols = dead.data();
    sweep.sides = sides.data();
  }
  sweep.h = grid.h_x();
  sweep.rho = meta.discount;
  sweep.lateral = lateral_from_meta(meta);
  sweep.maximize = !floor_eq;
  sweep.dt = grid.h_t() / std::max(1, meta.substeps);

  PolicyField policy = policy_shell(grid, spec.control_dim(), 0);
  const int nx = grid.nx();
  std::vector<double> scratch(nx);
  std::vector<int> arg(nx, -1);
  for (int it = 0; it < grid.nt(); ++it) {
    if (tables.time_dependent) {
      detail::refresh_coef_tables(spec, grid, grid.time.time(it + 1) - sweep.dt, tables);
    }
    const double* vin = field.value.data() + grid.index(it + 1, 0, 0);
    detail::sweep_state(sweep, vin, scratch.data(), arg.data(), opts.parallel);
    for (int ix = 0; ix < nx; ++ix) {
      if (arg[ix] < 0) continue;
      const std::size_t node = policy.node(it, ix, 0);
      policy.defined[node] = 1;
      for (int c = 0; c < policy.u_dim; ++c) {
        policy.u[node * policy.u_dim + c] = tables.upoints[arg[ix]][c];
      }
    }
  }
  return policy;
}

PolicyField extract_constrained(const ProblemSpec& spec, const ValueField& field,
                                const SolverOptions& opts) {
  const Grid& grid = field.grid;
  const FieldMetadata& meta = field.meta;
  CoefTables tables =
      detail::make_coef_tables(spec, grid, meta.u_resolution, grid.time.end());

  MStencil ms;
  ms.nm = grid.nm();
  ms.km = std::max(1, meta.pure_m_span);
  ms.a_res = meta.a_resolution;
  ms.hx = grid.h_x();
  ms.hm = grid.h_m();
  ms.rho = meta.discount;
  ms.A = meta.truncation_A;
  ms.lateral = lateral_from_meta(meta);
  const double span = ms.km * ms.hm;
  ms.wm_unit = 0.5 * ms.A * ms.A / (span * span);

  std::vector<std::uint8_t> absorbed;
  const std::uint8_t* frozen = nullptr;
  if (spec.has_domain()) {
    absorbed = detail::outside_closure(spec, grid);
    frozen = absorbed.data();
  }

  const double dt = grid.h_t() / std::max(1, meta.substeps);
  PolicyField policy = policy_shell(grid, spec.control_dim(), 1);
  const std::size_t slice = grid.slice_nodes();
  std::vector<double> scratch(slice);
  std::vector<int> arg_u(slice, -1);
  std::vector<double> arg_a(slice, 0.0);
  for (int it = 0; it < grid.nt(); ++it) {
    if (tables.time_dependent) {
      detail::refresh_coef_tables(spec, grid, grid.time.time(it + 1) - dt, tables);
    }
    const double* vin = field.value.data() + grid.index(it + 1, 0, 0);
    detail::sweep_constrained(tables, ms, dt, vin, scratch.data(), frozen, arg_u.data(),
                              arg_a.data(), opts.parallel);
    for (std::size_t n = 0; n < slice; ++n) {
      if (arg_u[n] < 0) continue;
      const std::size_t node = static_cast<std::size_t>(it) * slice + n;
      policy.defined[node] = 1;
      for (int c = 0; c < policy.u_dim; ++c) {
        policy.u[node * policy.u_dim + c] = tables.upoints[arg_u[n]][c];
      }
      policy.a[node] = arg_a[n];
    }
  }
  return policy;
}

}  // namespace

PolicyField extract_policy(const ProblemSpec& spec, const ValueField& field,
                           const SolverOptions& opts) {
  detail::check_solver_inputs(spec, field.grid, field.grid.has_m(), opts);
  if (field.meta.u_resolution < 1) {
    throw SpecError("the field metadata does not record a control resolution");
  }
  if (field.meta.equation == "expectation_constrained") {
    if (!field.grid.has_m()) {
      throw SpecError("an expectation-constrained field needs an m axis");
    }
    return extract_constrained(spec, field, opts);
  }
  if (field.grid.has_m()) {
    throw SpecError("a pure-state field should not carry an m axis");
  }
  return extract_state(spec, field, opts);
}

ControlProgram make_policy_control(std::shared_ptr<const PolicyField> policy,
                                   const ProblemSpec& spec) {
  if (!policy) throw SpecError("null policy");
  const bool nearest = spec.controls.finite_list();
  auto fn = [policy, nearest](double t, std::span<const double> x, double m,
                              std::vector<double>& out) {
    out = policy_u_at(*policy, t, x.empty() ? 0.0 : x[0], m, nearest);
  };
  return ControlProgram::grid_lookup(std::move(fn), spec.controls);
}

MartingaleProgram make_policy_martingale(std::shared_ptr<const PolicyField> policy,
                                         double bound) {
  if (!policy) throw SpecError("null policy");
  auto fn = [policy](double t, std::span<const double> x, double m,
                     std::vector<double>& out) {
    out = policy_a_at(*policy, t, x.empty() ? 0.0 : x[0], m, false);
  };
  return MartingaleProgram::grid_lookup(std::move(fn), policy->a_dim, bound);
}

}  // namespace cstoc
