#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "cstoc/problem.hpp"
#include "cstoc/timegrid.hpp"

namespace cstoc {

/// Closed axis-aligned box in (t, x, m)-space; empty x bounds mean the state
/// is unconstrained. A point is outside when any coordinate lies strictly
/// beyond a bound, so boundary points count as inside.
struct PathRegion {
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  std::vector<double> x_lo, x_hi;  // per-coordinate, empty = unbounded
  double m_lo = -std::numeric_limits<double>::infinity();
  double m_hi = std::numeric_limits<double>::infinity();

  bool contains(double t, std::span<const double> x, double m) const;

  static PathRegion x_box(std::vector<double> lo, std::vector<double> hi);
};

/// Read-only view of a simulated path's history up to and including node
/// `step`; programs may depend on nothing later (non-anticipativity).
struct StepContext {
  const TimeGrid* grid = nullptr;
  int step = 0;
  std::span<const double> X;  // nodes 0..step, flattened (step+1) x dim
  std::span<const double> M;  // nodes 0..step
  std::span<const double> Y;  // nodes 0..step
  int dim = 1;

  double t() const { return grid->time(step); }
  std::span<const double> x() const { return X.subspan(static_cast<std::size_t>(step) * dim, dim); }
  double m() const { return M[step]; }
  double y() const { return Y[step]; }
};

/// Rule producing the switch node index of a concatenation: the node of the
/// stopping time tau, when it is already determined by the visible history.
struct TauRule {
  enum class Kind { Immediate, Terminal, FixedTime, FirstExit };
  Kind kind = Kind::Terminal;
  double time = 0.0;  // FixedTime: tau = first node at or after this time
  PathRegion region;  // FirstExit: tau = first node with (t, X, M) outside

  static TauRule immediate() { return {Kind::Immediate, 0.0, {}}; }
  static TauRule terminal() { return {Kind::Terminal, 0.0, {}}; }
  static TauRule fixed_time(double s) { return {Kind::FixedTime, s, {}}; }
  static TauRule first_exit(PathRegion r) { return {Kind::FirstExit, 0.0, std::move(r)}; }

  /// Node index of tau, or -1 when the history seen so far cannot decide it.
  int resolve(const StepContext& ctx) const;
};

namespace detail {

/// One combinator tree is shared by control and martingale programs; only the
/// output dimension and the projection applied by the wrappers differ.
struct ProgramNode;
using NodePtr = std::shared_ptr<const ProgramNode>;

struct ProgramNode {
  enum class Kind { Constant, TimeTable, Feedback, Lookup, ThresholdSwitch, Concatenate };
  Kind kind = Kind::Constant;

  std::vector<double> constant;

  std::vector<double> breakpoints;          // TimeTable, ascending
  std::vector<std::vector<double>> table;   // value on [b_j, b_{j+1})

  std::vector<Expression> feedback;         // per-component functions of x

  std::function<void(double t, std::span<const double> x, double m, std::vector<double>& out)>
      lookup;                               // grid-feedback interpolation hook

  NodePtr base, continuation;

  // ThresholdSwitch monitor: either a Y-level or a region-exit condition.
  double level = 0.0;
  bool monitor_region = false;
  PathRegion region;

  // Concatenate: switch strictly after tau; gamma >= 0 at tau selects the
  // continuation branch, otherwise the base continues.
  TauRule tau;
  Expression gamma;
};

void eval_node(const ProgramNode& node, const StepContext& ctx, std::vector<double>& out);

}  // namespace detail

/// Decision rule for the control u along a simulated path. Values are always
/// projected onto the control box, and the value at step i depends only on
/// history up to node i.
class ControlProgram {
 public:
  ControlProgram() = default;

  static ControlProgram constant(std::vector<double> u, ControlSet box);
  /// Piecewise-constant in time: values[j] on [breakpoints[j], breakpoints[j+1]).
  static ControlProgram time_table(std::vector<double> breakpoints,
                                   std::vector<std::vector<double>> values, ControlSet box);
  /// State feedback u = (e_1(x), ..., e_k(x)).
  static ControlProgram feedback(std::vector<Expression> components, ControlSet box);
  /// Interpolated policy lookup (t, x, m) -> u; `fn` must be pure.
  static ControlProgram grid_lookup(
      std::function<void(double, std::span<const double>, double, std::vector<double>&)> fn,
      ControlSet box);

  /// Emits `base` until the monitor first triggers at a node (Y <= eps, or
  /// the node leaves `region`), and `continuation` from that node on.
  static ControlProgram threshold_switch_y(ControlProgram base, double eps,
                                           ControlProgram continuation);
  static ControlProgram threshold_switch_region(ControlProgram base, PathRegion region,
                                                ControlProgram continuation);

  void value(const StepContext& ctx, std::vector<double>& out) const;
  std::vector<double> value(const StepContext& ctx) const;

  const ControlSet& box() const { return box_; }
  bool empty() const { return !node_; }

  friend ControlProgram concatenate(ControlProgram base, ControlProgram continuation,
                                    TauRule tau, Expression gamma);

 private:
  detail::NodePtr node_;
  ControlSet box_;
};

/// Concatenation nu (x)_{tau,Gamma} nu-bar: base's value up to and including
/// tau, then the continuation on {gamma(tau) >= 0} and base off it.
ControlProgram concatenate(ControlProgram base, ControlProgram continuation, TauRule tau,
                           Expression gamma);

/// Follow `base` until the running distance Y first reaches <= eps, then hand
/// over to the problem's invariant feedback law evaluated on the state.
/// Throws SpecError when the problem has no domain or no feedback_hat.
ControlProgram switch_to_feedback(const ProblemSpec& spec, ControlProgram base, double eps);

/// Integrand a of the auxiliary martingale M = m + int a dW. Same combinator
/// forms as ControlProgram; every emitted value is clamped to |a_i| <= bound.
class MartingaleProgram {
 public:
  MartingaleProgram() = default;

  static MartingaleProgram zero(int dim, double bound);
  static MartingaleProgram constant(std::vector<double> a, double bound);
  static MartingaleProgram time_table(std::vector<double> breakpoints,
                                      std::vector<std::vector<double>> values, int dim,
                                      double bound);
  static MartingaleProgram feedback(std::vector<Expression> components, double bound);
  static MartingaleProgram grid_lookup(
      std::function<void(double, std::span<const double>, double, std::vector<double>&)> fn,
      int dim, double bound);
  static MartingaleProgram threshold_switch_y(MartingaleProgram base, double eps,
                                              MartingaleProgram continuation);

  void value(const StepContext& ctx, std::vector<double>& out) const;

  int dim() const { return dim_; }
  double bound() const { return bound_; }
  bool empty() const { return !node_; }

  friend MartingaleProgram concatenate(MartingaleProgram base, MartingaleProgram continuation,
                                       TauRule tau, Expression gamma);

 private:
  detail::NodePtr node_;
  int dim_ = 1;
  double bound_ = 0.0;
};

MartingaleProgram concatenate(MartingaleProgram base, MartingaleProgram continuation,
                              TauRule tau, Expression gamma);

}  // namespace cstoc
