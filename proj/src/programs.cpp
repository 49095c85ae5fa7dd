#include "cstoc/programs.hpp"

#include <algorithm>
#include <cmath>

namespace cstoc {

bool PathRegion::contains(double t, std::span<const double> x, double m) const {
  if (t < t_lo || t > t_hi) return false;
  if (!x_lo.empty())
    for (std::size_t i = 0; i < x_lo.size() && i < x.size(); ++i)
      if (x[i] < x_lo[i] || x[i] > x_hi[i]) return false;
  return m >= m_lo && m <= m_hi;
}

PathRegion PathRegion::x_box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size()) throw SpecError("region box bounds differ in size");
  PathRegion r;
  r.x_lo = std::move(lo);
  r.x_hi = std::move(hi);
  return r;
}

int TauRule::resolve(const StepContext& ctx) const {
  switch (kind) {
    case Kind::Immediate:
      return 0;
    case Kind::Terminal:
      return ctx.grid->steps();
    case Kind::FixedTime:
      return ctx.grid->first_node_at_or_after(time);
    case Kind::FirstExit:
      for (int j = 0; j <= ctx.step; ++j) {
        const auto xj = ctx.X.subspan(static_cast<std::size_t>(j) * ctx.dim, ctx.dim);
        if (!region.contains(ctx.grid->time(j), xj, ctx.M[j])) return j;
      }
      return -1;  // not exited within the visible history
  }
  return -1;
}

namespace detail {

namespace {

void eval_feedback(const std::vector<Expression>& components, const StepContext& ctx,
                   std::vector<double>& out) {
  EvalContext ec;
  ec.t = ctx.t();
  ec.x = ctx.x();
  ec.y = ctx.y();
  ec.m = ctx.m();
  out.resize(components.size());
  for (std::size_t i = 0; i < components.size(); ++i) out[i] = components[i].eval(ec);
}

bool threshold_triggered(const ProgramNode& node, const StepContext& ctx) {
  if (!node.monitor_region) return ctx.y() <= node.level;
  for (int j = 0; j <= ctx.step; ++j) {
    const auto xj = ctx.X.subspan(static_cast<std::size_t>(j) * ctx.dim, ctx.dim);
    if (!node.region.contains(ctx.grid->time(j), xj, ctx.M[j])) return true;
  }
  return false;
}

bool concat_switched(const ProgramNode& node, const StepContext& ctx) {
  const int j = node.tau.resolve(ctx);
  if (j < 0 || ctx.step <= j) return false;  // base up to and including tau
  EvalContext ec;
  ec.t = ctx.grid->time(j);
  ec.x = ctx.X.subspan(static_cast<std::size_t>(j) * ctx.dim, ctx.dim);
  ec.y = ctx.Y[j];
  ec.m = ctx.M[j];
  return node.gamma.eval(ec) >= 0.0;
}

}  // namespace

void eval_node(const ProgramNode& node, const StepContext& ctx, std::vector<double>& out) {
  switch (node.kind) {
    case ProgramNode::Kind::Constant:
      out = node.constant;
      return;
    case ProgramNode::Kind::TimeTable: {
      const double t = ctx.t();
      auto it = std::upper_bound(node.breakpoints.begin(), node.breakpoints.end(), t);
      const std::size_t j = it == node.breakpoints.begin()
                                ? 0
                                : static_cast<std::size_t>(it - node.breakpoints.begin()) - 1;
      out = node.table[j];
      return;
    }
    case ProgramNode::Kind::Feedback:
      eval_feedback(node.feedback, ctx, out);
      return;
    case ProgramNode::Kind::Lookup:
      node.lookup(ctx.t(), ctx.x(), ctx.m(), out);
      return;
    case ProgramNode::Kind::ThresholdSwitch:
      eval_node(threshold_triggered(node, ctx) ? *node.continuation : *node.base, ctx, out);
      return;
    case ProgramNode::Kind::Concatenate:
      eval_node(concat_switched(node, ctx) ? *node.continuation : *node.base, ctx, out);
      return;
  }
}

namespace {

NodePtr make_constant(std::vector<double> v) {
  ProgramNode n;
  n.kind = ProgramNode::Kind::Constant;
  n.constant = std::move(v);
  return std::make_shared<const ProgramNode>(std::move(n));
}

NodePtr make_time_table(std::vector<double> breaks, std::vector<std::vector<double>> values,
                        std::size_t want_dim) {
  if (breaks.empty() || breaks.size() != values.size())
    throw SpecError("time table needs one value per breakpoint");
  if (!std::is_sorted(breaks.begin(), breaks.end()))
    throw SpecError("time table breakpoints must be ascending");
  for (const auto& v : values)
    if (v.size() != want_dim) throw SpecError("time table value has wrong dimension");
  ProgramNode n;
  n.kind = ProgramNode::Kind::TimeTable;
  n.breakpoints = std::move(breaks);
  n.table = std::move(values);
  return std::make_shared<const ProgramNode>(std::move(n));
}

NodePtr make_feedback(std::vector<Expression> components) {
  if (components.empty()) throw SpecError("feedback program needs at least one component");
  ProgramNode n;
  n.kind = ProgramNode::Kind::Feedback;
  n.feedback = std::move(components);
  return std::make_shared<const ProgramNode>(std::move(n));
}

NodePtr make_lookup(
    std::function<void(double, std::span<const double>, double, std::vector<double>&)> fn) {
  if (!fn) throw SpecError("grid lookup program needs a function");
  ProgramNode n;
  n.kind = ProgramNode::Kind::Lookup;
  n.lookup = std::move(fn);
  return std::make_shared<const ProgramNode>(std::move(n));
}

NodePtr make_threshold(NodePtr base, NodePtr cont, double eps, bool region_mode,
                       PathRegion region) {
  if (!base || !cont) throw SpecError("threshold switch needs base and continuation");
  ProgramNode n;
  n.kind = ProgramNode::Kind::ThresholdSwitch;
  n.base = std::move(base);
  n.continuation = std::move(cont);
  n.level = eps;
  n.monitor_region = region_mode;
  n.region = std::move(region);
  return std::make_shared<const ProgramNode>(std::move(n));
}

NodePtr make_concat(NodePtr base, NodePtr cont, TauRule tau, Expression gamma) {
  if (!base || !cont) throw SpecError("concatenation needs base and continuation");
  ProgramNode n;
  n.kind = ProgramNode::Kind::Concatenate;
  n.base = std::move(base);
  n.continuation = std::move(cont);
  n.tau = std::move(tau);
  n.gamma = std::move(gamma);
  return std::make_shared<const ProgramNode>(std::move(n));
}

void clamp_to_box(const ControlSet& box, std::vector<double>& v) {
  v.resize(box.lo.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], box.lo[i], box.hi[i]);
}

}  // namespace

}  // namespace detail

ControlProgram ControlProgram::constant(std::vector<double> u, ControlSet box) {
  box.validate();
  if (u.size() != static_cast<std::size_t>(box.dim()))
    throw SpecError("constant control has wrong dimension");
  ControlProgram p;
  p.node_ = detail::make_constant(std::move(u));
  p.box_ = std::move(box);
  return p;
}

ControlProgram ControlProgram::time_table(std::vector<double> breakpoints,
                                          std::vector<std::vector<double>> values,
                                          ControlSet box) {
  box.validate();
  ControlProgram p;
  p.node_ = detail::make_time_table(std::move(breakpoints), std::move(values),
                                    static_cast<std::size_t>(box.dim()));
  p.box_ = std::move(box);
  return p;
}

ControlProgram ControlProgram::feedback(std::vector<Expression> components, ControlSet box) {
  box.validate();
  if (components.size() != static_cast<std::size_t>(box.dim()))
    throw SpecError("feedback control has wrong dimension");
  ControlProgram p;
  p.node_ = detail::make_feedback(std::move(components));
  p.box_ = std::move(box);
  return p;
}

ControlProgram ControlProgram::grid_lookup(
    std::function<void(double, std::span<const double>, double, std::vector<double>&)> fn,
    ControlSet box) {
  box.validate();
  ControlProgram p;
  p.node_ = detail::make_lookup(std::move(fn));
  p.box_ = std::move(box);
  return p;
}

ControlProgram ControlProgram::threshold_switch_y(ControlProgram base, double eps,
                                                  ControlProgram continuation) {
  ControlProgram p;
  p.box_ = base.box_;
  p.node_ = detail::make_threshold(std::move(base.node_), std::move(continuation.node_), eps,
                                   false, {});
  return p;
}

ControlProgram ControlProgram::threshold_switch_region(ControlProgram base, PathRegion region,
                                                       ControlProgram continuation) {
  ControlProgram p;
  p.box_ = base.box_;
  p.node_ = detail::make_threshold(std::move(base.node_), std::move(continuation.node_), 0.0,
                                   true, std::move(region));
  return p;
}

void ControlProgram::value(const StepContext& ctx, std::vector<double>& out) const {
  if (!node_) throw SpecError("empty control program");
  detail::eval_node(*node_, ctx, out);
  detail::clamp_to_box(box_, out);
}

std::vector<double> ControlProgram::value(const StepContext& ctx) const {
  std::vector<double> out;
  value(ctx, out);
  return out;
}

ControlProgram concatenate(ControlProgram base, ControlProgram continuation, TauRule tau,
                           Expression gamma) {
  ControlProgram p;
  p.box_ = base.box_;
  p.node_ = detail::make_concat(std::move(base.node_), std::move(continuation.node_),
                                std::move(tau), std::move(gamma));
  return p;
}

ControlProgram switch_to_feedback(const ProblemSpec& spec, ControlProgram base, double eps) {
  if (!spec.has_domain()) throw SpecError("switch_to_feedback needs a state domain");
  if (spec.feedback_hat.empty()) throw SpecError("switch_to_feedback needs feedback_hat");
  ControlProgram cont = ControlProgram::feedback(spec.feedback_hat, spec.controls);
  return ControlProgram::threshold_switch_y(std::move(base), eps, std::move(cont));
}

MartingaleProgram MartingaleProgram::zero(int dim, double bound) {
  return constant(std::vector<double>(dim, 0.0), bound);
}

MartingaleProgram MartingaleProgram::constant(std::vector<double> a, double bound) {
  if (a.empty()) throw SpecError("martingale program needs dimension >= 1");
  if (!(bound >= 0.0)) throw SpecError("martingale truncation bound must be >= 0");
  MartingaleProgram p;
  p.dim_ = static_cast<int>(a.size());
  p.bound_ = bound;
  p.node_ = detail::make_constant(std::move(a));
  return p;
}

MartingaleProgram MartingaleProgram::time_table(std::vector<double> breakpoints,
                                                std::vector<std::vector<double>> values,
                                                int dim, double bound) {
  if (!(bound >= 0.0)) throw SpecError("martingale truncation bound must be >= 0");
  MartingaleProgram p;
  p.dim_ = dim;
  p.bound_ = bound;
  p.node_ = detail::make_time_table(std::move(breakpoints), std::move(values),
                                    static_cast<std::size_t>(dim));
  return p;
}

MartingaleProgram MartingaleProgram::feedback(std::vector<Expression> components, double bound) {
  if (!(bound >= 0.0)) throw SpecError("martingale truncation bound must be >= 0");
  MartingaleProgram p;
  p.dim_ = static_cast<int>(components.size());
  p.bound_ = bound;
  p.node_ = detail::make_feedback(std::move(components));
  return p;
}

MartingaleProgram MartingaleProgram::grid_lookup(
    std::function<void(double, std::span<const double>, double, std::vector<double>&)> fn,
    int dim, double bound) {
  if (!(bound >= 0.0)) throw SpecError("martingale truncation bound must be >= 0");
  MartingaleProgram p;
  p.dim_ = dim;
  p.bound_ = bound;
  p.node_ = detail::make_lookup(std::move(fn));
  return p;
}

MartingaleProgram MartingaleProgram::threshold_switch_y(MartingaleProgram base, double eps,
                                                        MartingaleProgram continuation) {
  MartingaleProgram p;
  p.dim_ = base.dim_;
  p.bound_ = base.bound_;
  p.node_ = detail::make_threshold(std::move(base.node_), std::move(continuation.node_), eps,
                                   false, {});
  return p;
}

void MartingaleProgram::value(const StepContext& ctx, std::vector<double>& out) const {
  if (!node_) throw SpecError("empty martingale program");
  detail::eval_node(*node_, ctx, out);
  out.resize(dim_);
  for (double& a : out) a = std::clamp(a, -bound_, bound_);
}

MartingaleProgram concatenate(MartingaleProgram base, MartingaleProgram continuation,
                              TauRule tau, Expression gamma) {
  MartingaleProgram p;
  p.dim_ = base.dim_;
  p.bound_ = base.bound_;
  p.node_ = detail::make_concat(std::move(base.node_), std::move(continuation.node_),
                                std::move(tau), std::move(gamma));
  return p;
}

}  // namespace cstoc
