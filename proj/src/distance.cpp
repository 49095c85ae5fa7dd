#include <algorithm>
#include <cmath>
#include <limits>

#include "cstoc/problem.hpp"

namespace cstoc {

namespace {

constexpr double kProjectionTol = 1e-8;
constexpr double kGradStep = 1e-5;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

double eval_delta(const ProblemSpec& spec, std::span<const double> x) {
  EvalContext ctx;
  ctx.x = x;
  return spec.domain->delta.eval(ctx);
}

/// Damped-Newton projection of x onto the delta=0 level set, then a bisection
/// polish along the segment from x to the projected point so the reported
/// distance refers to the first boundary crossing.
double generic_distance(const ProblemSpec& spec, std::span<const double> x) {
  const int d = spec.dim;
  std::vector<double> y(x.begin(), x.end());
  double dy = eval_delta(spec, y);
  if (dy <= 0.0) return 0.0;

  for (int iter = 0; iter < 100; ++iter) {
    const std::vector<double> grad = delta_gradient(spec, y);
    const double g2 = [&] {
      double s = 0.0;
      for (double g : grad) s += g * g;
      return s;
    }();
    if (g2 < 1e-16) break;  // flat spot; fall back to bisection below
    // Newton step for the scalar level-set equation, damped to at most halve
    // overshoot oscillations.
    double step = dy / g2;
    std::vector<double> ynext(d);
    double dnext = 0.0;
    for (int damp = 0; damp < 30; ++damp) {
      for (int i = 0; i < d; ++i) ynext[i] = y[i] - step * grad[i];
      dnext = eval_delta(spec, ynext);
      if (std::abs(dnext) <= std::abs(dy) || std::abs(dnext) < kProjectionTol) break;
      step *= 0.5;
    }
    y = ynext;
    dy = dnext;
    if (std::abs(dy) < kProjectionTol) break;
  }

  // Bisection along [x, y*] for the first sign change; guards against the
  // Newton iterate having skipped past a nearer boundary sheet.
  std::vector<double> a(x.begin(), x.end()), b = y;
  double db = eval_delta(spec, b);
  if (db > 0.0) {
    // Projection failed to cross; walk outward along the segment direction.
    std::vector<double> dir(d);
    double len = 0.0;
    for (int i = 0; i < d; ++i) {
      dir[i] = b[i] - a[i];
      len += dir[i] * dir[i];
    }
    len = std::sqrt(len);
    if (len < 1e-14) {
      const std::vector<double> grad = delta_gradient(spec, a);
      const double g = norm2(grad);
      for (int i = 0; i < d; ++i) dir[i] = g > 1e-14 ? -grad[i] / g : (i == 0 ? 1.0 : 0.0);
      len = 1.0;
    } else {
      for (int i = 0; i < d; ++i) dir[i] /= len;
      len = 1.0;
    }
    double span = std::max(1.0, norm2(a));
    bool crossed = false;
    for (int k = 1; k <= 64; ++k) {
      for (int i = 0; i < d; ++i) b[i] = a[i] + dir[i] * span * k / 8.0;
      if (eval_delta(spec, b) <= 0.0) {
        crossed = true;
        break;
      }
    }
    if (!crossed) return std::numeric_limits<double>::infinity();
  }
  for (int iter = 0; iter < 60; ++iter) {
    std::vector<double> mid(d);
    for (int i = 0; i < d; ++i) mid[i] = 0.5 * (a[i] + b[i]);
    if (eval_delta(spec, mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  double dist = 0.0;
  for (int i = 0; i < d; ++i) dist += (b[i] - x[i]) * (b[i] - x[i]);
  return std::sqrt(dist);
}

}  // namespace

std::vector<double> delta_gradient(const ProblemSpec& spec, std::span<const double> x) {
  const int d = spec.dim;
  std::vector<double> grad(d);
  std::vector<double> probe(x.begin(), x.end());
  for (int i = 0; i < d; ++i) {
    probe[i] = x[i] + kGradStep;
    const double up = eval_delta(spec, probe);
    probe[i] = x[i] - kGradStep;
    const double dn = eval_delta(spec, probe);
    probe[i] = x[i];
    grad[i] = (up - dn) / (2.0 * kGradStep);
  }
  return grad;
}

double distance_to_complement(const ProblemSpec& spec, std::span<const double> x) {
  if (!spec.domain) throw SpecError("problem has no domain descriptor");
  const DomainSpec& dom = *spec.domain;
  const int d = spec.dim;

  switch (dom.kind) {
    case DomainKind::HalfSpace: {
      double dot = 0.0, nn = 0.0;
      for (int i = 0; i < d; ++i) {
        dot += dom.normal[i] * x[i];
        nn += dom.normal[i] * dom.normal[i];
      }
      if (nn <= 0.0) throw SpecError("half-space domain with zero normal");
      return std::max(0.0, (dot - dom.offset) / std::sqrt(nn));
    }
    case DomainKind::Box: {
      double dist = std::numeric_limits<double>::infinity();
      for (int i = 0; i < d; ++i) {
        const double lo = x[i] - dom.box_lo[i];
        const double hi = dom.box_hi[i] - x[i];
        dist = std::min(dist, std::min(lo, hi));
      }
      return std::max(0.0, dist);
    }
    case DomainKind::Ball: {
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) r2 += (x[i] - dom.center[i]) * (x[i] - dom.center[i]);
      return std::max(0.0, dom.radius - std::sqrt(r2));
    }
    case DomainKind::Generic:
      return generic_distance(spec, x);
  }
  return 0.0;
}

}  // namespace cstoc
