#include "cstoc/grid.hpp"

#include <algorithm>
#include <cmath>

#include "cstoc/problem.hpp"

namespace cstoc {

int Axis::cell(double z) const {
  const int i = static_cast<int>(std::floor((z - lo) / h()));
  return std::clamp(i, 0, nodes - 2);
}

void Axis::validate() const {
  if (!(hi > lo)) throw SpecError("axis needs hi > lo");
  if (nodes < 2) throw SpecError("axis needs at least two nodes");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw SpecError("axis bounds must be finite");
}

Grid Grid::make(TimeGrid t, Axis x_axis) {
  x_axis.validate();
  Grid g;
  g.time = t;
  g.x = x_axis;
  return g;
}

Grid Grid::make(TimeGrid t, Axis x_axis, Axis m_axis) {
  x_axis.validate();
  m_axis.validate();
  Grid g;
  g.time = t;
  g.x = x_axis;
  g.m = m_axis;
  return g;
}

ValueField ValueField::zeros(Grid g) {
  ValueField f;
  f.grid = g;
  f.value.assign(g.total_nodes(), 0.0);
  f.masked.assign(g.total_nodes(), 0);
  return f;
}

int ValueField::lowest_unmasked(int it, int ix) const {
  const int n = grid.nm();
  for (int j = 0; j < n; ++j)
    if (!is_masked(it, ix, j)) return j;
  return n;
}

void ValueField::check_consistent() const {
  if (value.size() != grid.total_nodes() || masked.size() != grid.total_nodes())
    throw SpecError("field storage does not match its grid");
  for (std::size_t k = 0; k < value.size(); ++k) {
    if (masked[k] && value[k] != kNegInf)
      throw SpecError("masked node carries a non-sentinel value");
    if (!masked[k] && !std::isfinite(value[k]))
      throw SpecError("unmasked node carries a non-finite value");
  }
}

namespace {

/// Linear interpolation in m within one (it, ix) column, with the query level
/// clamped upward to the lowest unmasked node. Returns kNegInf for a fully
/// masked column.
double column_value(const ValueField& f, int it, int ix, double m) {
  if (!f.grid.has_m()) return f.is_masked(it, ix) ? kNegInf : f.at(it, ix);
  const Axis& ma = *f.grid.m;
  const int low = f.lowest_unmasked(it, ix);
  if (low >= ma.nodes) return kNegInf;
  const double mq = std::max({m, ma.lo, ma.at(low)});
  if (mq >= ma.hi) return f.at(it, ix, ma.nodes - 1);
  int j = std::max(ma.cell(mq), low);
  if (j >= ma.nodes - 1) return f.at(it, ix, ma.nodes - 1);
  const double w = std::clamp((mq - ma.at(j)) / ma.h(), 0.0, 1.0);
  const double a = f.at(it, ix, j), b = f.at(it, ix, j + 1);
  if (is_neg_inf(a) || is_neg_inf(b)) return kNegInf;  // defensive; mask is a down-set
  return (1.0 - w) * a + w * b;
}

struct Bracket {
  int i0, i1;
  double w;  // weight of i1
};

Bracket bracket_time(const TimeGrid& t, double tq) {
  const double lo = t.start(), hi = t.end();
  const double c = std::clamp(tq, lo, hi);
  int i = std::clamp(static_cast<int>(std::floor((c - lo) / t.dt())), 0, t.steps() - 1);
  double w = (c - t.time(i)) / t.dt();
  return {i, i + 1, std::clamp(w, 0.0, 1.0)};
}

Bracket bracket_axis(const Axis& a, double zq) {
  const double c = std::clamp(zq, a.lo, a.hi);
  const int i = a.cell(c);
  const double w = std::clamp((c - a.at(i)) / a.h(), 0.0, 1.0);
  return {i, i + 1, w};
}

double query_x(const ValueField& f, double x) {
  if (!f.meta.log_x) return x;
  // Log-axis fields take queries in original coordinates; nonpositive states
  // are clamped to the left edge of the truncated axis.
  return x > 0.0 ? std::log(x) : f.grid.x.lo;
}

}  // namespace

double field_value(const ValueField& field, double t, double x, double m) {
  const Bracket bt = bracket_time(field.grid.time, t);
  const Bracket bx = bracket_axis(field.grid.x, query_x(field, x));
  double acc = 0.0;
  for (int dt = 0; dt < 2; ++dt)
    for (int dx = 0; dx < 2; ++dx) {
      const double w = (dt ? bt.w : 1.0 - bt.w) * (dx ? bx.w : 1.0 - bx.w);
      if (w == 0.0) continue;
      const double v = column_value(field, dt ? bt.i1 : bt.i0, dx ? bx.i1 : bx.i0, m);
      if (is_neg_inf(v)) return kNegInf;
      acc += w * v;
    }
  return acc;
}

bool field_masked_at(const ValueField& field, double t, double x, double m) {
  return is_neg_inf(field_value(field, t, x, m));
}

namespace {

std::vector<double> policy_lookup(const PolicyField& p, const std::vector<double>& data,
                                  int dim, double t, double x, double m, bool nearest) {
  std::vector<double> out(dim, 0.0);
  if (dim == 0 || p.grid.nt() == 0) return out;
  const TimeGrid& tg = p.grid.time;
  const int it = std::clamp(static_cast<int>(std::floor((std::clamp(t, tg.start(), tg.end()) -
                                                         tg.start()) /
                                                        tg.dt())),
                            0, tg.steps() - 1);
  const Bracket bx = bracket_axis(p.grid.x, x);
  Bracket bm{0, 0, 0.0};
  if (p.grid.has_m()) bm = bracket_axis(*p.grid.m, m);

  if (nearest) {
    const int ix = bx.w < 0.5 ? bx.i0 : bx.i1;
    int im = 0;
    if (p.grid.has_m()) im = bm.w < 0.5 ? bm.i0 : bm.i1;
    // Snap upward in m to the nearest defined node (masked nodes store none).
    if (p.grid.has_m())
      while (im < p.grid.nm() && !p.defined[p.node(it, ix, im)]) ++im;
    if (im >= p.grid.nm() || !p.defined[p.node(it, ix, im)]) return out;
    const double* src = data.data() + p.node(it, ix, im) * dim;
    out.assign(src, src + dim);
    return out;
  }

  double total = 0.0;
  for (int dx = 0; dx < 2; ++dx)
    for (int dm = 0; dm < (p.grid.has_m() ? 2 : 1); ++dm) {
      const int ix = dx ? bx.i1 : bx.i0;
      int im = p.grid.has_m() ? (dm ? bm.i1 : bm.i0) : 0;
      if (p.grid.has_m())
        while (im < p.grid.nm() && !p.defined[p.node(it, ix, im)]) ++im;
      if (im >= p.grid.nm() || !p.defined[p.node(it, ix, im)]) continue;
      const double w =
          (dx ? bx.w : 1.0 - bx.w) * (p.grid.has_m() ? (dm ? bm.w : 1.0 - bm.w) : 1.0);
      if (w == 0.0) continue;
      const double* src = data.data() + p.node(it, ix, im) * dim;
      for (int c = 0; c < dim; ++c) out[c] += w * src[c];
      total += w;
    }
  if (total > 0.0)
    for (double& v : out) v /= total;
  return out;
}

}  // namespace

std::vector<double> policy_u_at(const PolicyField& policy, double t, double x, double m,
                                bool nearest) {
  return policy_lookup(policy, policy.u, policy.u_dim, t, x, m, nearest);
}

std::vector<double> policy_a_at(const PolicyField& policy, double t, double x, double m,
                                bool nearest) {
  return policy_lookup(policy, policy.a, policy.a_dim, t, x, m, nearest);
}

}  // namespace cstoc
