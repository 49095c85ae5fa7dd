#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cstoc/expr.hpp"

namespace cstoc {

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Admissible control values: a closed box in R^k, optionally replaced by an
/// explicit finite list of points. `points_per_axis` is the default
/// discretization hint used by grid minimization.
struct ControlSet {
  std::vector<double> lo;           // size k
  std::vector<double> hi;           // size k
  std::vector<std::vector<double>> points;  // optional finite list (each size k)
  int points_per_axis = 11;

  int dim() const { return static_cast<int>(lo.size()); }
  bool finite_list() const { return !points.empty(); }

  /// Throws SpecError on inconsistent bounds or out-of-box list points.
  void validate() const;

  /// The discretized control grid in lexicographic order (axis 0 slowest):
  /// the finite list verbatim, or `res` evenly spaced points per axis
  /// (res <= 1 collapses an axis to its midpoint). Used everywhere a minimum
  /// over U is taken, so the lexicographic order fixes every tie-break.
  std::vector<std::vector<double>> grid(int res) const;
  std::vector<std::vector<double>> grid() const { return grid(points_per_axis); }

  /// Projects v onto the box (finite lists project per-axis onto bounds too).
  std::vector<double> clamp(std::vector<double> v) const;

  static ControlSet box1(double lo, double hi, int res = 11);
};

/// Built-in domain geometries with exact distance formulas; `Generic` falls
/// back to the numeric projection in distance_to_complement.
enum class DomainKind { HalfSpace, Box, Ball, Generic };

/// The open state domain O, described by a signed-distance-like expression
/// delta (positive inside, zero on the boundary, negative outside) plus an
/// optional analytic shape used for exact distance computations.
struct DomainSpec {
  Expression delta;
  DomainKind kind = DomainKind::Generic;
  // HalfSpace: {x : normal.x > offset}
  std::vector<double> normal;
  double offset = 0.0;
  // Box: product of (lo_i, hi_i)
  std::vector<double> box_lo, box_hi;
  // Ball: {x : |x - center| < radius}
  std::vector<double> center;
  double radius = 0.0;
};

/// User-asserted analytic hypotheses that cannot be machine-checked from an
/// expression (semicontinuity, boundedness, growth class).
struct AssumptionFlags {
  bool f_lsc = true;
  bool g_usc = true;
  bool f_bounded = false;
  bool coeff_linear_growth = true;
};

/// A complete constrained control problem: dynamics dX = mu dt + sigma dW on
/// [0,T], reward f(X_T), constraint g(X_T) (or the state-domain variant),
/// control set U, optional domain O with feedback laws.
struct ProblemSpec {
  int dim = 1;                 // d: state dimension
  double horizon = 1.0;        // T
  double discount = 0.0;       // rate in the discounted equation form
  std::vector<Expression> drift;              // size d
  std::vector<std::vector<Expression>> diffusion;  // d x d
  Expression reward;           // f
  Expression constraint;       // g
  ControlSet controls;         // U
  std::optional<DomainSpec> domain;           // O
  std::vector<Expression> feedback_hat;       // invariant feedback, size d -> u in R^k
  std::vector<Expression> feedback_check;     // inward-drift feedback for the boundary audit
  AssumptionFlags assumptions;
  bool log_step = false;       // opt-in log-coordinate stepping (d=1, x>0)
  std::string name;

  int control_dim() const { return controls.dim(); }
  bool has_domain() const { return domain.has_value(); }

  /// Structural consistency: dimensions positive, expression variable indices
  /// within (d, k), T > 0, control set well-formed. Throws SpecError.
  void check_well_formed() const;

  /// Evaluates drift into `out` (size d) at state x, control u, time t.
  void eval_drift(double t, std::span<const double> x, std::span<const double> u,
                  std::span<double> out) const;
  /// Evaluates diffusion into `out` (row-major d x d).
  void eval_diffusion(double t, std::span<const double> x, std::span<const double> u,
                      std::span<double> out) const;
  double eval_reward(std::span<const double> x) const;
  double eval_constraint(std::span<const double> x) const;
  /// Feedback laws map the state to a control vector (size k).
  std::vector<double> eval_feedback_hat(std::span<const double> x) const;
  std::vector<double> eval_feedback_check(std::span<const double> x) const;
};

/// Distance from x to the complement of O (0 when x is outside O).
/// Exact for half-space/box/ball; generic domains use damped-Newton
/// projection onto the delta=0 level set with a bisection fallback,
/// tolerance 1e-8.
double distance_to_complement(const ProblemSpec& spec, std::span<const double> x);

/// Gradient of the domain's delta by central differences with step 1e-5.
std::vector<double> delta_gradient(const ProblemSpec& spec, std::span<const double> x);

}  // namespace cstoc
