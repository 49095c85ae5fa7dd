#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "cstoc/grid.hpp"
#include "cstoc/hamiltonian.hpp"
#include "cstoc/problem.hpp"

namespace cstoc {

/// Treatment of the spatial grid ends (where a stencil read would leave the
/// axis): `Clamp` repeats the edge value (monotone, the default), while
/// `Extrapolate` continues the field linearly (exact for fields linear in x,
/// at the price of the monotone-combination guarantee at the two edge
/// columns).
enum class LateralBoundary { Clamp, Extrapolate };

/// Raised in strict-CFL mode when the requested time step is too large for
/// an explicit monotone update; carries the largest admissible step.
struct CflError : SpecError {
  CflError(const std::string& what, double admissible)
      : SpecError(what), admissible_dt(admissible) {}
  double admissible_dt = 0.0;
};

struct SolverOptions {
  LateralBoundary lateral = LateralBoundary::Clamp;
  /// When true, a time step violating the explicit stability bound aborts
  /// with CflError instead of being subdivided internally.
  bool strict_cfl = false;
  /// Use the multi-threaded sweep kernels (results are bit-identical to the
  /// serial reference kernels; this only toggles scheduling).
  bool parallel = true;
  /// Slack added below the constraint floor before masking a node as
  /// infeasible, and added above the terminal constraint band. Negative
  /// means "one m-cell" (the default).
  double mask_margin = -1.0;
  /// Refuse lattices larger than this many stored nodes.
  std::size_t max_nodes = 50'000'000;
  /// Record the minimizing controls per node while sweeping.
  bool record_policy = true;
  /// Finite stand-in for "infeasible" in the expectation-constrained
  /// terminal condition (the scheme never does arithmetic on the masked
  /// sentinel; infeasibility enters as a bounded penalty and the mask is
  /// applied afterwards from the floor). Nonpositive means automatic:
  /// 2 * (1 + max |f| on the grid). Comparisons of two solves are exact
  /// only when both use the same level.
  double penalty_level = 0.0;
};

/// A solved field together with the controls chosen at each node while it
/// was produced.
struct SolveResult {
  ValueField value;
  PolicyField policy;
};

/// Constraint floor v(t,x): the smallest expected terminal constraint value
/// reachable from (t,x), solved backward on a (t,x) lattice with an
/// explicit monotone upwind scheme (minimum over the control grid).
/// Without a state domain the terminal condition is g itself; with a domain
/// the equation switches to the exit-probability floor: nodes outside the
/// closure of O are absorbing with value 1 and the interior terminal value
/// is 0, so v(t,x) = smallest achievable probability of leaving O by T.
/// The returned field has no mask (the infimum always exists).
ValueField solve_constraint_floor(const ProblemSpec& spec, const Grid& grid,
                                  const HamiltonianParams& params,
                                  const SolverOptions& opts = {});

/// Unconstrained value W(t,x) = sup over controls of E[f(X_T)] (discounted
/// at the spec's rate), same lattice and scheme as the floor but maximizing.
/// Any state domain on the spec is ignored here.
SolveResult solve_unconstrained(const ProblemSpec& spec, const Grid& grid,
                                const HamiltonianParams& params,
                                const SolverOptions& opts = {});

/// State-constrained value on the closure of O: nodes outside the closure
/// are masked, and at nodes adjacent to the boundary the control grid is
/// filtered to moves that stay inside (a control whose diffusion or drift
/// would read beyond the closure is inadmissible there). An empty admissible
/// set masks the node (the supremum over nothing). Without a domain this
/// coincides with solve_unconstrained.
SolveResult solve_state_constrained(const ProblemSpec& spec, const Grid& grid,
                                    const HamiltonianParams& params,
                                    const SolverOptions& opts = {});

/// Expectation-constrained value V(t,x,m) on a (t,x,m) lattice: the
/// constraint level m rides along as an extra state driven by the
/// martingale loading a, discretized by grid-aligned slope stencils plus a
/// pure-m spreading stencil when the state diffusion degenerates. Nodes
/// below the constraint floor (minus the mask margin) are masked as
/// infeasible; the terminal slice carries f(x) where g(x) <= m + margin.
/// With a state domain the constraint is the exit probability: rows outside
/// the closure of O carry the unconstrained continuation value when m
/// reaches 1 and are masked below.
/// `floor_field`, when given, must be a field solved by
/// solve_constraint_floor on the same (t,x) sub-lattice and is used for the
/// mask instead of an internal floor solve.
SolveResult solve_expectation_constrained(const ProblemSpec& spec, const Grid& grid,
                                          const HamiltonianParams& params,
                                          const SolverOptions& opts = {},
                                          const ValueField* floor_field = nullptr);

/// Recomputes the per-node minimizing controls of a solved field by running
/// a single explicit update on each stored slice, with the discretization
/// parameters taken from the field's metadata (same substep size, control
/// resolution, truncation and stencil spans the solver used, so on
/// mask-free fixtures the result reproduces the recorded policy exactly;
/// near masked nodes the candidate set shrinks because sentinel reads are
/// inadmissible). Works for any of the four equations, keyed by
/// meta.equation. Only `opts.parallel` is consulted.
PolicyField extract_policy(const ProblemSpec& spec, const ValueField& field,
                           const SolverOptions& opts = {});

/// Central-difference audit of a solved field at an interior node: assembles
/// the discrete derivatives, evaluates the matching closed-form Hamiltonian
/// (keyed by meta.equation), and returns
///   -D_t V + H(x, DV, D^2 V) + rho V
/// in original state coordinates (log-axis fields are transformed back).
/// Empty when the node is not interior or the stencil touches a masked
/// node. Small values certify that the sweep discretizes the intended
/// equation; the magnitude decays with the mesh on smooth regions.
std::optional<double> viscosity_residual(const ProblemSpec& spec,
                                         const HamiltonianParams& params,
                                         const ValueField& field, int it, int ix,
                                         int im = 0);

}  // namespace cstoc
