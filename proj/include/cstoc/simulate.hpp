#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cstoc/problem.hpp"
#include "cstoc/programs.hpp"
#include "cstoc/timegrid.hpp"

namespace cstoc {

/// One simulated trajectory of the augmented system (X, M, Y) on a time grid:
/// the controlled state, the auxiliary martingale, and the running minimum of
/// the distance to the domain's complement.
struct AugmentedPath {
  TimeGrid grid;
  int dim = 1;
  std::vector<double> X;   // (N+1) x dim, row-major by node
  std::vector<double> M;   // N+1
  std::vector<double> Y;   // N+1
  std::vector<double> dW;  // N x dim Brownian increments actually used
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  bool divergent = false;  // a non-finite state appeared; tail frozen

  std::span<const double> x(int i) const {
    return {X.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> terminal_x() const { return x(grid.steps()); }
  double terminal_m() const { return M.back(); }
  double terminal_y() const { return Y.back(); }
};

/// Euler-Maruyama simulation with the control frozen over each step:
///   X(s+h) = X(s) + mu(s, X, u) h + sigma(s, X, u) dW,
///   M(s+h) = M(s) + a(s)^T dW,
///   Y(s+h) = min(Y(s), d(X(s+h))),   Y(s0) = min(y, d(x)).
/// Increments are drawn from a counter-based stream addressed by
/// (seed, path_index, step, coordinate), so the same address always yields
/// the same path bit-for-bit, in any batch order and thread count.
/// Problems with log_step are advanced in log coordinates (the state stays
/// positive); expression domain errors propagate as EvalError, while overflow
/// to a non-finite state marks the path divergent and freezes the tail.
AugmentedPath simulate(const ProblemSpec& spec, double t, std::span<const double> x, double m,
                       double y, const ControlProgram& control, const MartingaleProgram& mart,
                       const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index = 0);

/// Same scheme driven by caller-supplied increments (N x dim, row-major).
/// Used for coupling runs across grid resolutions: aggregate fine-grid
/// increments and replay them on a coarse grid.
AugmentedPath simulate_with_increments(const ProblemSpec& spec, double t,
                                       std::span<const double> x, double m, double y,
                                       const ControlProgram& control,
                                       const MartingaleProgram& mart, const TimeGrid& grid,
                                       std::vector<double> dW);

/// Smallest node index whose (t, X, M) lies outside the closed region, or
/// N when the whole path stays inside (the tau-and-T convention). Exits are
/// detected at nodes only.
int first_exit(const AugmentedPath& path, const PathRegion& region);

}  // namespace cstoc
