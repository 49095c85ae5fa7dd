#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cstoc/problem.hpp"
#include "cstoc/verify.hpp"

/// Checkers for the geometric hypotheses behind the state-constrained value:
/// that the declared feedback law keeps closed-loop paths inside the domain,
/// that the drift points inward with vanishing noise along the boundary, and
/// that the Hamiltonian's curvature mismatch stays bounded under refinement.

namespace cstoc {

/// A point on (or numerically near) the domain boundary, together with the
/// inward normal estimated from the gradient of delta and the radius of the
/// neighborhood audited around it.
struct BoundaryProbe {
  std::vector<double> x0;
  std::vector<double> normal;
  double radius = 0.0;
};

/// The drift flow started at a boundary point under the inward feedback law,
/// reported as offsets from the start: offsets[k] is (position after time
/// epsilons[k]) minus x0, and lags[k] records the elapsed time verbatim.
struct InwardCurve {
  std::vector<double> epsilons;
  std::vector<std::vector<double>> offsets;
  std::vector<double> lags;
};

struct BoundaryOptions {
  long n_paths = 10000;             // closed-loop sample paths per start state
  int steps = 100;                  // time steps per simulated path
  std::uint64_t seed = 1;
  int n_boundary_samples = 1000;    // projected boundary points to audit
  double neighborhood_fraction = 0.02;  // probe radius / box diameter
  double sigma_tol = 1e-8;          // largest |sigma| tolerated on the boundary
  long sample_budget = 2000;        // tuples for the curvature-mismatch audit
  bool parallel = true;
};

/// Simulates the closed-loop dynamics under the invariant feedback law from
/// each start state and reports the fraction of path nodes that land outside
/// the open domain (delta <= 0). Passes only when the fraction is zero; a
/// problem without a domain passes vacuously.
VerificationReport check_feedback_invariance(const ProblemSpec& spec,
                                             const std::vector<std::vector<double>>& starts,
                                             const BoundaryOptions& opts = {});

/// Integrates the drift field under the inward feedback law from the probe
/// point by classical fourth-order Runge-Kutta (step = smallest positive
/// sample / 10) and returns the offsets at the requested times. Throws if
/// the flow blows up before the largest sample.
InwardCurve build_inward_curve(const ProblemSpec& spec, const BoundaryProbe& probe,
                               std::span<const double> epsilons);

/// Samples boundary points (uniform draws in the declared box projected onto
/// the delta = 0 level set by Newton steps), then reports iota_hat = the
/// smallest drift/inward-normal product over neighborhoods of those points
/// and sigma_hat = the largest diffusion magnitude on the boundary itself.
/// Passes when iota_hat > 0 and sigma_hat <= sigma_tol.
VerificationReport check_class_R_sufficient(const ProblemSpec& spec,
                                            const BoundaryOptions& opts = {});

/// Audits the growth of the Hamiltonian's curvature mismatch: for sampled
/// argument tuples (x, y, p, q, Q, n) it evaluates the gap between the two
/// one-sided Hamiltonians at the extremal curvature pair and the smallest
/// multiplier that dominates the gap by the modulus
///   |x-y| (1 + |q| + n^2 |x-y|) + (1 + |x|) |p-q| + (1 + |x|^2) |Q|.
/// Passes when that multiplier stays finite and under 2x between the half
/// and full sample budgets.
VerificationReport check_hamiltonian_regularity(const ProblemSpec& spec,
                                                const BoundaryOptions& opts = {});

}  // namespace cstoc
