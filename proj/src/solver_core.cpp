#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cstoc/solvers.hpp"
#include "solver_detail.hpp"

namespace cstoc::detail {

namespace {

double physical_state(const ProblemSpec& spec, double axis_value) {
  return spec.log_step ? std::exp(axis_value) : axis_value;
}

/// Fills one (ix, iu) entry of the tables in solve coordinates.
void eval_one(const ProblemSpec& spec, double t, double xp,
              const std::vector<double>& u, double& mu_out, double& sig_out) {
  double mu = 0.0, sig = 0.0;
  spec.eval_drift(t, std::span<const double>(&xp, 1), u, std::span<double>(&mu, 1));
  spec.eval_diffusion(t, std::span<const double>(&xp, 1), u, std::span<double>(&sig, 1));
  if (!std::isfinite(mu) || !std::isfinite(sig)) {
    std::ostringstream os;
    os << "coefficients are not finite at x=" << xp << " (mu=" << mu << ", sigma=" << sig
       << ")";
    throw SpecError(os.str());
  }
  if (spec.log_step) {
    // The axis carries z = log x; Ito's rule gives the z-coefficients.
    mu = mu / xp - 0.5 * sig * sig / (xp * xp);
    sig = sig / xp;
  }
  mu_out = mu;
  sig_out = sig;
}

double table_rate(const CoefTables& tables, double h) {
  double rate = 0.0;
  const std::size_t n = tables.mu.size();
  for (std::size_t i = 0; i < n; ++i) {
    rate = std::max(rate, std::abs(tables.mu[i]) / h + tables.sig2[i] / (h * h));
  }
  return rate;
}

}  // namespace

CoefTables make_coef_tables(const ProblemSpec& spec, const Grid& grid, int u_res, double t) {
  CoefTables tables;
  tables.upoints = spec.controls.grid(u_res);
  tables.nu = static_cast<int>(tables.upoints.size());
  tables.nx = grid.nx();
  tables.xs_phys.resize(tables.nx);
  for (int ix = 0; ix < tables.nx; ++ix) {
    tables.xs_phys[ix] = physical_state(spec, grid.x.at(ix));
  }
  bool uses_t = false;
  for (const auto& e : spec.drift) uses_t = uses_t || e.uses_t();
  for (const auto& row : spec.diffusion)
    for (const auto& e : row) uses_t = uses_t || e.uses_t();
  tables.time_dependent = uses_t;
  const std::size_t n = static_cast<std::size_t>(tables.nx) * tables.nu;
  tables.mu.resize(n);
  tables.sig.resize(n);
  tables.sig2.resize(n);
  refresh_coef_tables(spec, grid, t, tables);
  return tables;
}

void refresh_coef_tables(const ProblemSpec& spec, const Grid& grid, double t,
                         CoefTables& tables) {
  for (int ix = 0; ix < tables.nx; ++ix) {
    const double xp = tables.xs_phys[ix];
    for (int iu = 0; iu < tables.nu; ++iu) {
      const std::size_t k = static_cast<std::size_t>(ix) * tables.nu + iu;
      double mu = 0.0, sig = 0.0;
      eval_one(spec, t, xp, tables.upoints[iu], mu, sig);
      tables.mu[k] = mu;
      tables.sig[k] = sig;
      tables.sig2[k] = sig * sig;
    }
  }
  tables.rate = table_rate(tables, grid.h_x());
}

std::vector<std::uint8_t> outside_closure(const ProblemSpec& spec, const Grid& grid) {
  std::vector<std::uint8_t> out(grid.nx(), 0);
  if (!spec.has_domain()) return out;
  for (int ix = 0; ix < grid.nx(); ++ix) {
    const double xp = physical_state(spec, grid.x.at(ix));
    EvalContext ctx;
    ctx.x = std::span<const double>(&xp, 1);
    const double delta = spec.domain->delta.eval(ctx);
    out[ix] = delta < -kClosureTol ? 1 : 0;
  }
  return out;
}

std::vector<SideStatus> classify_sides(const ProblemSpec& spec, const Grid& grid,
                                       bool restrict_to_domain) {
  const int nx = grid.nx();
  std::vector<SideStatus> sides(nx);
  for (int ix = 0; ix < nx; ++ix) {
    sides[ix].left = ix > 0 ? kSideNormal : kSideGhost;
    sides[ix].right = ix + 1 < nx ? kSideNormal : kSideGhost;
  }
  if (!restrict_to_domain || !spec.has_domain()) return sides;
  const double h = grid.h_x();
  auto in_closure = [&](double axis_value) {
    const double xp = physical_state(spec, axis_value);
    EvalContext ctx;
    ctx.x = std::span<const double>(&xp, 1);
    return spec.domain->delta.eval(ctx) >= -kClosureTol;
  };
  for (int ix = 0; ix < nx; ++ix) {
    const double z = grid.x.at(ix);
    const double zl = ix > 0 ? grid.x.at(ix - 1) : z - h;
    const double zr = ix + 1 < nx ? grid.x.at(ix + 1) : z + h;
    if (!in_closure(zl)) sides[ix].left = kSideForbidden;
    if (!in_closure(zr)) sides[ix].right = kSideForbidden;
  }
  return sides;
}

StepPlan plan_substeps(double h_t, double rate, bool strict) {
  StepPlan plan;
  const double load = h_t * rate;
  plan.substeps = load <= kCflFill ? 1 : static_cast<int>(std::ceil(load / kCflFill));
  if (plan.substeps < 1) plan.substeps = 1;
  if (strict && plan.substeps > 1) {
    const double admissible = kCflFill / rate;
    std::ostringstream os;
    os << "time step " << h_t << " violates the explicit stability bound; "
       << "the largest admissible step at this resolution is " << admissible;
    throw CflError(os.str(), admissible);
  }
  plan.dt = h_t / plan.substeps;
  return plan;
}

namespace {

/// Reads vin at column ic (possibly -1 or nx: the ghost positions), with
/// the lateral rule applied. Returns the masked sentinel when the read
/// rests on masked data.
inline double read_ghost(const double* vin, int nx, int ic, LateralBoundary lat) {
  if (ic >= 0 && ic < nx) return vin[ic];
  const int edge = ic < 0 ? 0 : nx - 1;
  const int inner = ic < 0 ? 1 : nx - 2;
  const double ve = vin[edge];
  if (lat == LateralBoundary::Clamp) return ve;
  const double vi = vin[inner];
  if (is_neg_inf(ve) || is_neg_inf(vi)) return kNegInf;
  return 2.0 * ve - vi;
}

void sweep_state_range(const StateSweep& s, const double* vin, double* vout, int* arg_u,
                       int begin, int end) {
  const CoefTables& coef = *s.coef;
  const int nx = coef.nx;
  const int nu = coef.nu;
  const double h = s.h;
  const double h2 = h * h;
  const double dt = s.dt;
  for (int ix = begin; ix < end; ++ix) {
    if (s.dead_cols != nullptr && s.dead_cols[ix]) {
      vout[ix] = kNegInf;
      if (arg_u != nullptr) arg_u[ix] = -1;
      continue;
    }
    const double vc = vin[ix];
    double best = 0.0;
    bool have = false;
    int best_iu = -1;
    if (!is_neg_inf(vc)) {
      for (int iu = 0; iu < nu; ++iu) {
        const double mu = coef.mu_at(ix, iu);
        const double sig2 = coef.sig2_at(ix, iu);
        const bool diffusive = sig2 > kSigmaFloor * kSigmaFloor;
        const bool need_left = diffusive || mu < 0.0;
        const bool need_right = diffusive || mu > 0.0;
        if (s.sides != nullptr) {
          if (need_left && s.sides[ix].left == kSideForbidden) continue;
          if (need_right && s.sides[ix].right == kSideForbidden) continue;
        }
        const double cp = dt * (std::max(mu, 0.0) / h + 0.5 * sig2 / h2);
        const double cm = dt * (std::max(-mu, 0.0) / h + 0.5 * sig2 / h2);
        const double c0 = 1.0 - s.rho * dt - cp - cm;
        double cand = c0 * vc;
        bool dead = false;
        if (cp > 0.0) {
          const double vr = read_ghost(vin, nx, ix + 1, s.lateral);
          if (is_neg_inf(vr)) dead = true; else cand += cp * vr;
        }
        if (!dead && cm > 0.0) {
          const double vl = read_ghost(vin, nx, ix - 1, s.lateral);
          if (is_neg_inf(vl)) dead = true; else cand += cm * vl;
        }
        if (dead) continue;
        if (!have || (s.maximize ? cand > best : cand < best)) {
          best = cand;
          best_iu = iu;
          have = true;
        }
      }
    }
    vout[ix] = have ? best : kNegInf;
    if (arg_u != nullptr) arg_u[ix] = have ? best_iu : -1;
  }
}

}  // namespace

void sweep_state(const StateSweep& s, const double* vin, double* vout, int* arg_u,
                 bool parallel) {
  const int nx = s.coef->nx;
#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int ix = 0; ix < nx; ++ix) {
      sweep_state_range(s, vin, vout, arg_u, ix, ix + 1);
    }
    return;
  }
#else
  (void)parallel;
#endif
  sweep_state_range(s, vin, vout, arg_u, 0, nx);
}

void check_solver_inputs(const ProblemSpec& spec, const Grid& grid, bool want_m,
                         const SolverOptions& opts) {
  spec.check_well_formed();
  if (spec.dim != 1) {
    throw SpecError("grid solvers support one-dimensional state problems only");
  }
  grid.x.validate();
  if (want_m && !grid.has_m()) {
    throw SpecError("this equation needs a constraint-level axis on the grid");
  }
  if (!want_m && grid.has_m()) {
    throw SpecError("this equation runs on a (t,x) grid; drop the m axis");
  }
  if (want_m) grid.m->validate();
  if (grid.total_nodes() > opts.max_nodes) {
    std::ostringstream os;
    os << "lattice of " << grid.total_nodes() << " nodes exceeds the budget of "
       << opts.max_nodes;
    throw SpecError(os.str());
  }
  if (spec.log_step && grid.x.lo != grid.x.lo) {
    throw SpecError("invalid axis");  // unreachable; validate() already checks
  }
}

double resolve_mask_margin(const Grid& grid, const SolverOptions& opts) {
  if (opts.mask_margin >= 0.0) return opts.mask_margin;
  return grid.has_m() ? grid.h_m() : 0.0;
}

}  // namespace cstoc::detail
