#include "cstoc/problem.hpp"

#include <algorithm>
#include <cmath>

namespace cstoc {

void ControlSet::validate() const {
  if (lo.empty() || lo.size() != hi.size())
    throw SpecError("control set: empty or mismatched bounds");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i]))
      throw SpecError("control set: lo > hi on axis " + std::to_string(i + 1));
  for (const auto& p : points) {
    if (p.size() != lo.size())
      throw SpecError("control set: point dimension mismatch");
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] < lo[i] || p[i] > hi[i])
        throw SpecError("control set: listed point outside declared bounds");
  }
  if (points_per_axis < 1) throw SpecError("control set: points_per_axis < 1");
}

std::vector<std::vector<double>> ControlSet::grid(int res) const {
  if (finite_list()) return points;
  const int k = dim();
  std::vector<std::vector<double>> out;
  std::vector<int> counts(k);
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) {
    counts[i] = (lo[i] == hi[i] || res <= 1) ? 1 : res;
    total *= static_cast<std::size_t>(counts[i]);
  }
  out.reserve(total);
  std::vector<int> idx(k, 0);
  for (;;) {
    std::vector<double> u(k);
    for (int i = 0; i < k; ++i) {
      u[i] = counts[i] == 1 ? 0.5 * (lo[i] + hi[i])
                            : lo[i] + (hi[i] - lo[i]) * idx[i] / (counts[i] - 1);
    }
    out.push_back(std::move(u));
    int axis = k - 1;
    while (axis >= 0 && ++idx[axis] == counts[axis]) idx[axis--] = 0;
    if (axis < 0) break;
  }
  return out;
}

std::vector<double> ControlSet::clamp(std::vector<double> v) const {
  for (std::size_t i = 0; i < v.size() && i < lo.size(); ++i)
    v[i] = std::clamp(v[i], lo[i], hi[i]);
  return v;
}

ControlSet ControlSet::box1(double lo_, double hi_, int res) {
  ControlSet u;
  u.lo = {lo_};
  u.hi = {hi_};
  u.points_per_axis = res;
  return u;
}

namespace {

void check_indices(const Expression& e, const char* what, int d, int k,
                   bool allow_u = true) {
  if (e.max_x_index() > d)
    throw SpecError(std::string(what) + ": references x" +
                    std::to_string(e.max_x_index()) + " but dimension is " +
                    std::to_string(d));
  if (e.max_u_index() > (allow_u ? k : 0))
    throw SpecError(std::string(what) + ": references u" +
                    std::to_string(e.max_u_index()) +
                    (allow_u ? " but control dimension is " + std::to_string(k)
                             : " but controls are not in scope here"));
}

}  // namespace

void ProblemSpec::check_well_formed() const {
  if (dim < 1) throw SpecError("dimension must be >= 1");
  if (!(horizon > 0.0)) throw SpecError("horizon must be > 0");
  if (discount < 0.0) throw SpecError("discount must be >= 0");
  controls.validate();
  const int k = controls.dim();
  if (drift.size() != static_cast<std::size_t>(dim))
    throw SpecError("drift must have one expression per state dimension");
  if (diffusion.size() != static_cast<std::size_t>(dim))
    throw SpecError("diffusion must have d rows");
  for (const auto& row : diffusion)
    if (row.size() != static_cast<std::size_t>(dim))
      throw SpecError("diffusion must be a d x d matrix");
  for (const auto& e : drift) check_indices(e, "drift", dim, k);
  for (const auto& row : diffusion)
    for (const auto& e : row) check_indices(e, "diffusion", dim, k);
  check_indices(reward, "reward", dim, k, /*allow_u=*/false);
  check_indices(constraint, "constraint", dim, k, /*allow_u=*/false);
  if (domain) check_indices(domain->delta, "domain delta", dim, 0, false);
  if (!feedback_hat.empty() && feedback_hat.size() != static_cast<std::size_t>(k))
    throw SpecError("feedback_hat must have one expression per control axis");
  if (!feedback_check.empty() && feedback_check.size() != static_cast<std::size_t>(k))
    throw SpecError("feedback_check must have one expression per control axis");
  for (const auto& e : feedback_hat) check_indices(e, "feedback_hat", dim, 0, false);
  for (const auto& e : feedback_check) check_indices(e, "feedback_check", dim, 0, false);
  if (log_step && dim != 1)
    throw SpecError("log_step is only supported in one state dimension");
}

void ProblemSpec::eval_drift(double t, std::span<const double> x,
                             std::span<const double> u, std::span<double> out) const {
  EvalContext ctx;
  ctx.t = t;
  ctx.x = x;
  ctx.u = u;
  for (int i = 0; i < dim; ++i) out[i] = drift[i].eval(ctx);
}

void ProblemSpec::eval_diffusion(double t, std::span<const double> x,
                                 std::span<const double> u, std::span<double> out) const {
  EvalContext ctx;
  ctx.t = t;
  ctx.x = x;
  ctx.u = u;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) out[i * dim + j] = diffusion[i][j].eval(ctx);
}

double ProblemSpec::eval_reward(std::span<const double> x) const {
  EvalContext ctx;
  ctx.x = x;
  return reward.eval(ctx);
}

double ProblemSpec::eval_constraint(std::span<const double> x) const {
  EvalContext ctx;
  ctx.x = x;
  return constraint.eval(ctx);
}

std::vector<double> ProblemSpec::eval_feedback_hat(std::span<const double> x) const {
  if (feedback_hat.empty()) throw SpecError("no feedback_hat declared");
  EvalContext ctx;
  ctx.x = x;
  std::vector<double> u(feedback_hat.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = feedback_hat[i].eval(ctx);
  return controls.clamp(std::move(u));
}

std::vector<double> ProblemSpec::eval_feedback_check(std::span<const double> x) const {
  if (feedback_check.empty()) throw SpecError("no feedback_check declared");
  EvalContext ctx;
  ctx.x = x;
  std::vector<double> u(feedback_check.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = feedback_check[i].eval(ctx);
  return controls.clamp(std::move(u));
}

}  // namespace cstoc
