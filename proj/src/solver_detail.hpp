#pragma once

// Internal machinery shared by the solver translation units. Not installed.

#include <cstdint>
#include <vector>

#include "cstoc/grid.hpp"
#include "cstoc/problem.hpp"
#include "cstoc/solvers.hpp"

namespace cstoc::detail {

/// |sigma| at or below this is treated as a degenerate diffusion.
inline constexpr double kSigmaFloor = 1e-12;
/// Largest allowed dt * (stability rate): keeps every node weight positive.
inline constexpr double kCflFill = 0.95;
/// Slack on delta when testing membership in the closure of O.
inline constexpr double kClosureTol = 1e-12;

enum : std::uint8_t { kSideNormal = 0, kSideGhost = 1, kSideForbidden = 2 };
struct SideStatus {
  std::uint8_t left = kSideGhost;
  std::uint8_t right = kSideGhost;
};

/// Drift and squared diffusion per (x-node, control-grid point), in solve
/// coordinates (already transformed when the axis holds log x).
struct CoefTables {
  int nx = 0;
  int nu = 0;
  std::vector<std::vector<double>> upoints;  // nu entries, each control_dim
  std::vector<double> mu;                    // nx * nu
  std::vector<double> sig;                   // nx * nu (signed)
  std::vector<double> sig2;                  // nx * nu
  std::vector<double> xs_phys;               // nx physical states
  bool time_dependent = false;
  /// max over (x, u) of |mu|/h + sig2/h^2 (discount excluded).
  double rate = 0.0;

  double mu_at(int ix, int iu) const { return mu[static_cast<std::size_t>(ix) * nu + iu]; }
  double sig_at(int ix, int iu) const { return sig[static_cast<std::size_t>(ix) * nu + iu]; }
  double sig2_at(int ix, int iu) const { return sig2[static_cast<std::size_t>(ix) * nu + iu]; }
};

/// Builds the tables with coefficients evaluated at time t. Throws SpecError
/// for non-1D specs and for log axes reaching nonpositive states.
CoefTables make_coef_tables(const ProblemSpec& spec, const Grid& grid, int u_res, double t);

/// Re-evaluates mu / sig / sig2 (and the rate) at a new time; layout is kept.
void refresh_coef_tables(const ProblemSpec& spec, const Grid& grid, double t, CoefTables& tables);

/// True at x-nodes whose physical state lies outside the closure of O
/// (delta < -tol). All false when the spec has no domain.
std::vector<std::uint8_t> outside_closure(const ProblemSpec& spec, const Grid& grid);

/// Per-node classification of the two stencil directions for the
/// state-constrained equation: stepping to a neighbor node (or the ghost
/// position beyond the axis) that leaves the closure of O is forbidden.
std::vector<SideStatus> classify_sides(const ProblemSpec& spec, const Grid& grid,
                                       bool restrict_to_domain);

/// Substep plan for one stored time step of size h_t against stability rate
/// `rate` (which must already include the discount). Throws CflError in
/// strict mode when more than one substep would be needed.
struct StepPlan {
  int substeps = 1;
  double dt = 0.0;
};
StepPlan plan_substeps(double h_t, double rate, bool strict);

/// One explicit update of the pure-state equation on a time slice:
/// vout[ix] = best over the control grid of the monotone upwind combination
/// of vin. Dead columns (outside the closure) and starved nodes (no
/// admissible control) receive the masked sentinel. When `arg_u` is non-null
/// the index of the chosen control-grid point is stored there (-1 where
/// undefined).
struct StateSweep {
  const CoefTables* coef = nullptr;
  const SideStatus* sides = nullptr;          // nullptr: every node is interior/ghost
  const std::uint8_t* dead_cols = nullptr;    // nullptr: none
  double dt = 0.0;
  double h = 0.0;
  double rho = 0.0;
  LateralBoundary lateral = LateralBoundary::Clamp;
  bool maximize = true;
};
void sweep_state(const StateSweep& sweep, const double* vin, double* vout, int* arg_u,
                 bool parallel);

/// Shared guards: 1-D state, well-formed spec, axis/grid consistency, node
/// budget. Throws SpecError.
void check_solver_inputs(const ProblemSpec& spec, const Grid& grid, bool want_m,
                         const SolverOptions& opts);

double resolve_mask_margin(const Grid& grid, const SolverOptions& opts);

/// Fixed parameters of the (x, m) stencil family used by the
/// expectation-constrained equation: aligned-slope second differences along
/// the lattice directions (1, k) for the martingale coupling, plus a pure-m
/// spreading stencil of span `km` where the state diffusion degenerates.
struct MStencil {
  int nm = 0;
  int km = 1;           // m-cells spanned by the pure-m stencil
  int a_res = 5;        // cap on the aligned slope index |k|
  double hx = 0.0;
  double hm = 0.0;
  double rho = 0.0;
  double A = 0.0;       // martingale truncation
  double wm_unit = 0.0; // 0.5 * A^2 / (km*hm)^2, the pure-m rate
  LateralBoundary lateral = LateralBoundary::Clamp;
};

/// Chooses the pure-m span so its stability load never exceeds what the
/// drift/diffusion terms (or the requested step) already demand.
MStencil make_m_stencil(const Grid& grid, const HamiltonianParams& params,
                        const SolverOptions& opts, double rho);

/// Stability rate of the full constrained stencil family (includes rho).
double constrained_rate(const CoefTables& tables, const MStencil& ms, double hx);

/// One explicit update of the expectation-constrained equation on a
/// (x, m)-slice (layout ix*nm + jm). Frozen columns (absorbing rows) are
/// copied through. m-reads beyond the axis clamp to the edge levels. When
/// arg_u / arg_a are non-null the chosen control index and martingale
/// loading are recorded (-1 / 0 where the node is frozen or dead).
void sweep_constrained(const CoefTables& tables, const MStencil& ms, double dt,
                       const double* vin, double* vout, const std::uint8_t* frozen_cols,
                       int* arg_u, double* arg_a, bool parallel);

}  // namespace cstoc::detail
