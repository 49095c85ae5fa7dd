#pragma once

#include <span>
#include <vector>

#include "cstoc/problem.hpp"

namespace cstoc {

/// Search-space parameters for the discrete Hamiltonians.
struct HamiltonianParams {
  double A = 2.0;    // truncation radius: martingale loadings live in [-A, A]^d
  int u_res = 11;    // control-grid points per U axis
  int a_res = 5;     // aligned-slope range used by the grid scheme's m-coupling
  double rho = 0.0;  // discount rate carried through residuals

  void validate() const;  // throws SpecError on A <= 0, res < 1, rho < 0
};

struct HamiltonianResult {
  double value = 0.0;
  std::vector<double> u;
  std::vector<double> a;
};

/// Augmented-space Hamiltonian
///   H(x, p, Q) = min over u in the discretized U and a in [-A,A]^d of
///     -( mu(x,u).p_x + 1/2 [ tr(sigma sigma^T Q_xx) + 2 a.(sigma^T q_xm) + |a|^2 q_mm ] ),
/// the generator of (X, M) with stacked diffusion rows (sigma; a^T).
/// p has d+1 entries (x-gradient, then the m-derivative); Q is the symmetric
/// (d+1) x (d+1) Hessian, row-major. The a-minimization separates per
/// coordinate and is solved in closed form: the interior stationary point
/// when the quadratic is strictly convex in a_i (q_mm < 0), else the better
/// box end. Candidates are scanned in ascending a, keeping the first
/// minimum, and u follows the lexicographic grid order, so ties are
/// deterministic (e.g. a tie between -A and +A reports -A).
HamiltonianResult hamiltonian(const ProblemSpec& spec, const HamiltonianParams& params,
                              std::span<const double> x, std::span<const double> p,
                              std::span<const double> Q, double t = 0.0);

struct HamiltonianStateResult {
  double value = 0.0;
  std::vector<double> u;
};

/// State-space Hamiltonian without the martingale direction:
///   Hbar(x, p, Q) = min_u -( mu(x,u).p + 1/2 tr(sigma sigma^T Q) ),
/// with p of size d and Q of size d x d.
HamiltonianStateResult hamiltonian_state(const ProblemSpec& spec,
                                         const HamiltonianParams& params,
                                         std::span<const double> x, std::span<const double> p,
                                         std::span<const double> Q, double t = 0.0);

/// The max-over-u counterpart, sup_u -( mu.p + 1/2 tr(sigma sigma^T Q) ):
/// the operator of the constraint-floor equation (an infimum-type control
/// problem), used when auditing that field's residual.
HamiltonianStateResult hamiltonian_state_sup(const ProblemSpec& spec,
                                             const HamiltonianParams& params,
                                             std::span<const double> x,
                                             std::span<const double> p,
                                             std::span<const double> Q, double t = 0.0);

}  // namespace cstoc
