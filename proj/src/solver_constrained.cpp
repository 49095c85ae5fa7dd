#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cstoc/solvers.hpp"
#include "solver_detail.hpp"

namespace cstoc::detail {

MStencil make_m_stencil(const Grid& grid, const HamiltonianParams& params,
                        const SolverOptions& opts, double rho) {
  MStencil ms;
  ms.nm = grid.nm();
  ms.a_res = params.a_res;
  ms.hx = grid.h_x();
  ms.hm = grid.h_m();
  ms.rho = rho;
  ms.A = params.A;
  ms.lateral = opts.lateral;
  // Cap the pure-m stability load by what the step must already absorb.
  const double base_cap = std::max(rho, kCflFill / grid.h_t());
  ms.km = std::max(1, static_cast<int>(std::ceil((params.A / ms.hm) / std::sqrt(base_cap))));
  const double span = ms.km * ms.hm;
  ms.wm_unit = 0.5 * params.A * params.A / (span * span);
  return ms;
}

double constrained_rate(const CoefTables& tables, const MStencil& ms, double hx) {
  // Aligned-slope candidates load the step exactly like the plain
  // drift/diffusion stencil; the pure-m stencil (offered where sigma
  // degenerates) adds its own spreading rate on top of the local drift.
  double degenerate = 0.0;
  const std::size_t n = tables.mu.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (tables.sig2[i] <= kSigmaFloor * kSigmaFloor) {
      degenerate = std::max(degenerate,
                            std::abs(tables.mu[i]) / hx + tables.sig2[i] / (hx * hx));
    }
  }
  return std::max(tables.rate, degenerate + 2.0 * ms.wm_unit) + ms.rho;
}

namespace {

/// Reads a column at budget level j. Levels above the axis clamp to the top
/// node: the field is nondecreasing in the budget, so the edge value is a
/// safe stand-in. Levels below it count as infeasible; clamping there would
/// turn the bottom of the axis into a reflecting wall for the spreading
/// candidates and inflate the whole lower band.
inline double level_read(const double* col, int j, int nm) {
  if (j < 0) return kNegInf;
  return col[j >= nm ? nm - 1 : j];
}

/// Materializes the neighbor column at ix+dir (ghost rule applied at the
/// axis ends) into `out`.
void neighbor_column(const double* vin, int nx, int nm, int ix, int dir,
                     LateralBoundary lat, double* out) {
  const int ic = ix + dir;
  if (ic >= 0 && ic < nx) {
    const double* src = vin + static_cast<std::size_t>(ic) * nm;
    std::copy(src, src + nm, out);
    return;
  }
  const int edge = ic < 0 ? 0 : nx - 1;
  const int inner = ic < 0 ? 1 : nx - 2;
  const double* ve = vin + static_cast<std::size_t>(edge) * nm;
  if (lat == LateralBoundary::Clamp) {
    std::copy(ve, ve + nm, out);
    return;
  }
  const double* vi = vin + static_cast<std::size_t>(inner) * nm;
  for (int j = 0; j < nm; ++j) {
    out[j] = (is_neg_inf(ve[j]) || is_neg_inf(vi[j])) ? kNegInf : 2.0 * ve[j] - vi[j];
  }
  // Linear extrapolation is not order-preserving level-to-level; restore
  // monotonicity in m so the sweep keeps it exact (a no-op whenever the
  // extrapolated column is already nondecreasing).
  for (int j = 1; j < nm; ++j) {
    if (!is_neg_inf(out[j]) && !is_neg_inf(out[j - 1])) out[j] = std::max(out[j], out[j - 1]);
  }
}

void sweep_column(const CoefTables& tables, const MStencil& ms, double dt, const double* vin,
                  double* vout, const std::uint8_t* frozen_cols, int* arg_u, double* arg_a,
                  int ix, std::vector<double>& scratch) {
  const int nm = ms.nm;
  const int nx = tables.nx;
  const int nu = tables.nu;
  const double* ccol = vin + static_cast<std::size_t>(ix) * nm;
  double* ocol = vout + static_cast<std::size_t>(ix) * nm;
  if (frozen_cols != nullptr && frozen_cols[ix]) {
    std::copy(ccol, ccol + nm, ocol);
    if (arg_u != nullptr) {
      for (int j = 0; j < nm; ++j) {
        arg_u[static_cast<std::size_t>(ix) * nm + j] = -1;
        arg_a[static_cast<std::size_t>(ix) * nm + j] = 0.0;
      }
    }
    return;
  }
  scratch.resize(static_cast<std::size_t>(nm) * 2);
  double* rcol = scratch.data();
  double* lcol = scratch.data() + nm;
  neighbor_column(vin, nx, nm, ix, +1, ms.lateral, rcol);
  neighbor_column(vin, nx, nm, ix, -1, ms.lateral, lcol);

  int* au = arg_u != nullptr ? arg_u + static_cast<std::size_t>(ix) * nm : nullptr;
  double* aa = arg_a != nullptr ? arg_a + static_cast<std::size_t>(ix) * nm : nullptr;
  for (int j = 0; j < nm; ++j) {
    ocol[j] = kNegInf;
    if (au != nullptr) {
      au[j] = -1;
      aa[j] = 0.0;
    }
  }

  const double h2 = ms.hx * ms.hx;
  const double slope_unit = ms.hm / ms.hx;
  for (int iu = 0; iu < nu; ++iu) {
    const double mu = tables.mu_at(ix, iu);
    const double sig = tables.sig_at(ix, iu);
    const double sig2 = tables.sig2_at(ix, iu);
    // Drift rides on the flat upwind neighbors; the whole second-order part
    // (x-diffusion, cross term, m-diffusion) lives in the second difference
    // along the lattice direction (1, k), which equals
    // 1/2 sig^2 V_xx + a sig V_xm + 1/2 a^2 V_mm for a = sig * k * hm/hx.
    const double cp = dt * std::max(mu, 0.0) / ms.hx;
    const double cm = dt * std::max(-mu, 0.0) / ms.hx;
    const double w = dt * 0.5 * sig2 / h2;
    const bool diffusive = sig2 > kSigmaFloor * kSigmaFloor;
    int kmax = 0;
    if (diffusive) {
      const double reach = ms.A * ms.hx / (std::abs(sig) * ms.hm);
      kmax = std::min(ms.a_res, static_cast<int>(std::floor(reach + 1e-9)));
    }
    // Aligned-slope candidates: martingale loading a = sig * k * hm/hx,
    // second difference along the lattice direction (1, k).
    const double c0 = 1.0 - ms.rho * dt - cp - cm - 2.0 * w;
    for (int k = -kmax; k <= kmax; ++k) {
      const double a_val = sig * k * slope_unit;
      for (int j = 0; j < nm; ++j) {
        const double vc = ccol[j];
        if (is_neg_inf(vc)) continue;
        double cand = c0 * vc;
        bool dead = false;
        if (cp > 0.0) {
          const double v = rcol[j];
          if (is_neg_inf(v)) dead = true; else cand += cp * v;
        }
        if (!dead && cm > 0.0) {
          const double v = lcol[j];
          if (is_neg_inf(v)) dead = true; else cand += cm * v;
        }
        if (!dead && w > 0.0) {
          const double vr = level_read(rcol, j + k, nm);
          const double vl = level_read(lcol, j - k, nm);
          if (is_neg_inf(vr) || is_neg_inf(vl)) dead = true;
          else cand += w * (vr + vl);
        }
        if (dead) continue;
        if (is_neg_inf(ocol[j]) || cand > ocol[j]) {
          ocol[j] = cand;
          if (au != nullptr) {
            au[j] = iu;
            aa[j] = a_val;
          }
        }
      }
    }
    if (!diffusive) {
      // Pure-m spreading at full truncation (the +A/-A stencils coincide;
      // the recorded loading follows the ascending-a tie convention).
      const double wm = dt * ms.wm_unit;
      const double c0m = 1.0 - ms.rho * dt - cp - cm - 2.0 * wm;
      for (int j = 0; j < nm; ++j) {
        const double vc = ccol[j];
        if (is_neg_inf(vc)) continue;
        double cand = c0m * vc;
        bool dead = false;
        if (cp > 0.0) {
          const double v = rcol[j];
          if (is_neg_inf(v)) dead = true; else cand += cp * v;
        }
        if (!dead && cm > 0.0) {
          const double v = lcol[j];
          if (is_neg_inf(v)) dead = true; else cand += cm * v;
        }
        if (!dead) {
          const double vu = level_read(ccol, j + ms.km, nm);
          const double vd = level_read(ccol, j - ms.km, nm);
          if (is_neg_inf(vu) || is_neg_inf(vd)) dead = true;
          else cand += wm * (vu + vd);
        }
        if (dead) continue;
        if (is_neg_inf(ocol[j]) || cand > ocol[j]) {
          ocol[j] = cand;
          if (au != nullptr) {
            au[j] = iu;
            aa[j] = -ms.A;
          }
        }
      }
    }
  }
}

}  // namespace

void sweep_constrained(const CoefTables& tables, const MStencil& ms, double dt,
                       const double* vin, double* vout, const std::uint8_t* frozen_cols,
                       int* arg_u, double* arg_a, bool parallel) {
  const int nx = tables.nx;
#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel
    {
      std::vector<double> scratch;
#pragma omp for schedule(static)
      for (int ix = 0; ix < nx; ++ix) {
        sweep_column(tables, ms, dt, vin, vout, frozen_cols, arg_u, arg_a, ix, scratch);
      }
    }
    return;
  }
#else
  (void)parallel;
#endif
  std::vector<double> scratch;
  for (int ix = 0; ix < nx; ++ix) {
    sweep_column(tables, ms, dt, vin, vout, frozen_cols, arg_u, arg_a, ix, scratch);
  }
}

}  // namespace cstoc::detail

namespace cstoc {

namespace {

using detail::CoefTables;
using detail::MStencil;

void check_floor_compatible(const ValueField& vfloor, const Grid& grid) {
  if (vfloor.meta.equation != "constraint_floor") {
    throw SpecError("the supplied floor field was not solved by solve_constraint_floor");
  }
  const bool same_axis = vfloor.grid.x.lo == grid.x.lo && vfloor.grid.x.hi == grid.x.hi &&
                         vfloor.grid.x.nodes == grid.x.nodes;
  if (!(vfloor.grid.time == grid.time) || !same_axis || vfloor.grid.has_m()) {
    throw SpecError("the floor field lives on a different (t,x) lattice than the grid");
  }
}

}  // namespace

SolveResult solve_expectation_constrained(const ProblemSpec& spec, const Grid& grid,
                                          const HamiltonianParams& params,
                                          const SolverOptions& opts,
                                          const ValueField* floor_field) {
  detail::check_solver_inputs(spec, grid, /*want_m=*/true, opts);
  params.validate();
  const int nx = grid.nx();
  const int nm = grid.nm();
  const int nt = grid.nt();
  const double rho = spec.discount;
  const double margin = detail::resolve_mask_margin(grid, opts);

  const Grid sub = Grid::make(grid.time, grid.x);
  SolverOptions sub_opts = opts;
  sub_opts.record_policy = false;

  ValueField vfloor = floor_field != nullptr
                          ? *floor_field
                          : solve_constraint_floor(spec, sub, params, sub_opts);
  check_floor_compatible(vfloor, grid);

  const bool domain_mode = spec.has_domain();
  std::vector<std::uint8_t> absorbed;
  ValueField wfield;
  if (domain_mode) {
    absorbed = detail::outside_closure(spec, grid);
    wfield = solve_unconstrained(spec, sub, params, sub_opts).value;
  }
  const std::uint8_t* frozen = absorbed.empty() ? nullptr : absorbed.data();

  CoefTables tables = detail::make_coef_tables(spec, grid, params.u_res, grid.time.end());

  // Terminal reward / constraint samples and the bounded infeasibility level.
  std::vector<double> fvals(nx), gvals(nx);
  double fscale = 0.0;
  for (int ix = 0; ix < nx; ++ix) {
    const double xp = tables.xs_phys[ix];
    fvals[ix] = spec.eval_reward(std::span<const double>(&xp, 1));
    if (!std::isfinite(fvals[ix])) throw SpecError("terminal data is not finite on the grid");
    fscale = std::max(fscale, std::abs(fvals[ix]));
    gvals[ix] = domain_mode ? (absorbed[ix] ? 1.0 : 0.0)
                            : spec.eval_constraint(std::span<const double>(&xp, 1));
    if (!std::isfinite(gvals[ix])) throw SpecError("constraint data is not finite on the grid");
  }
  // Just deep enough that ending outside the terminal band never beats a
  // feasible continuation. Larger levels would be safe too, but they amplify
  // the cost the upwind transport charges for its own short-fall tail near
  // the band, so the default stays close to the floor.
  const double penalty = opts.penalty_level > 0.0 ? opts.penalty_level : 2.0 * (1.0 + fscale);

  MStencil ms = detail::make_m_stencil(grid, params, opts, rho);
  detail::StepPlan plan = detail::plan_substeps(
      grid.h_t(), detail::constrained_rate(tables, ms, grid.h_x()), opts.strict_cfl);

  ValueField field = ValueField::zeros(grid);
  field.meta.equation = "expectation_constrained";
  field.meta.truncation_A = params.A;
  field.meta.u_resolution = params.u_res;
  field.meta.a_resolution = params.a_res;
  field.meta.discount = rho;
  field.meta.mask_margin = margin;
  field.meta.lateral = opts.lateral == LateralBoundary::Clamp ? "clamp" : "extrapolate";
  field.meta.log_x = spec.log_step;
  field.meta.pure_m_span = ms.km;
  field.meta.mask_note = domain_mode
      ? "masked below the exit-probability floor minus the margin; rows outside the closure "
        "of O carry the unconstrained continuation value from m >= 1 - margin"
      : "masked below the constraint floor minus the margin; the terminal band keeps f "
        "where g(x) <= m + margin";

  PolicyField policy;
  policy.grid = grid;
  policy.u_dim = spec.control_dim();
  policy.a_dim = 1;
  const std::size_t pnodes = grid.total_nodes();
  if (opts.record_policy) {
    policy.u.assign(pnodes * static_cast<std::size_t>(policy.u_dim), 0.0);
    policy.a.assign(pnodes, 0.0);
    policy.defined.assign(pnodes, 0);
  }

  // Writes the working slice into the field with the floor mask applied.
  auto store_slice = [&](int it, const std::vector<double>& cur) {
    for (int ix = 0; ix < nx; ++ix) {
      const double level = vfloor.at(it, ix) - margin;
      for (int j = 0; j < nm; ++j) {
        if (grid.m->at(j) < level) {
          field.set_masked(it, ix, j);
        } else {
          field.set(it, ix, j, cur[static_cast<std::size_t>(ix) * nm + j]);
        }
      }
    }
  };

  // Terminal slice: f where the constraint band allows it, else the penalty.
  // The band predicate is written exactly like the mask predicate so the two
  // can never disagree on a borderline node.
  std::vector<double> cur(static_cast<std::size_t>(nx) * nm), nxt(cur.size());
  for (int ix = 0; ix < nx; ++ix) {
    for (int j = 0; j < nm; ++j) {
      cur[static_cast<std::size_t>(ix) * nm + j] =
          grid.m->at(j) < gvals[ix] - margin ? -penalty : fvals[ix];
    }
  }
  store_slice(nt, cur);

  std::vector<int> arg_u;
  std::vector<double> arg_a;
  if (opts.record_policy) {
    arg_u.assign(cur.size(), -1);
    arg_a.assign(cur.size(), 0.0);
  }

  int max_substeps = plan.substeps;
  for (int it = nt - 1; it >= 0; --it) {
    const double t_hi = grid.time.time(it + 1);
    if (tables.time_dependent) {
      detail::refresh_coef_tables(spec, grid, grid.time.time(it), tables);
      const double rate_lo = detail::constrained_rate(tables, ms, grid.h_x());
      detail::refresh_coef_tables(spec, grid, t_hi, tables);
      const double rate_hi = detail::constrained_rate(tables, ms, grid.h_x());
      plan = detail::plan_substeps(grid.h_t(), std::max(rate_lo, rate_hi) * 1.05,
                                   opts.strict_cfl);
    }
    max_substeps = std::max(max_substeps, plan.substeps);
    for (int s = 0; s < plan.substeps; ++s) {
      if (tables.time_dependent) {
        detail::refresh_coef_tables(spec, grid, t_hi - (s + 1) * plan.dt, tables);
      }
      const bool record = s == 0 && opts.record_policy;
      detail::sweep_constrained(tables, ms, plan.dt, cur.data(), nxt.data(), frozen,
                                record ? arg_u.data() : nullptr,
                                record ? arg_a.data() : nullptr, opts.parallel);
      std::swap(cur, nxt);
      if (domain_mode) {
        // Absorbing rows carry the unconstrained continuation value: the
        // state keeps evolving after leaving O, only the constraint is
        // settled (at exit probability 1).
        const int wt = s + 1 == plan.substeps ? it : it + 1;
        for (int ix = 0; ix < nx; ++ix) {
          if (!absorbed[ix]) continue;
          const double wv = wfield.at(wt, ix);
          for (int j = 0; j < nm; ++j) {
            cur[static_cast<std::size_t>(ix) * nm + j] =
                grid.m->at(j) >= 1.0 - margin ? wv : -penalty;
          }
        }
      }
      if (record) {
        for (std::size_t n = 0; n < cur.size(); ++n) {
          const int iu = arg_u[n];
          if (iu < 0) continue;
          const std::size_t node = static_cast<std::size_t>(it) * nx * nm + n;
          policy.defined[node] = 1;
          for (int c = 0; c < policy.u_dim; ++c) {
            policy.u[node * policy.u_dim + c] = tables.upoints[iu][c];
          }
          policy.a[node] = arg_a[n];
        }
      }
    }
    store_slice(it, cur);
    if (opts.record_policy) {
      for (int ix = 0; ix < nx; ++ix) {
        for (int j = 0; j < nm; ++j) {
          if (field.is_masked(it, ix, j)) {
            policy.defined[policy.node(it, ix, j)] = 0;
          }
        }
      }
    }
  }

  field.meta.substeps = max_substeps;
  field.check_consistent();

  SolveResult result;
  result.value = std::move(field);
  result.policy = std::move(policy);
  return result;
}

}  // namespace cstoc
