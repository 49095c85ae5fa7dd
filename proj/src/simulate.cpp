#include "cstoc/simulate.hpp"

#include <cmath>
#include <limits>

#include "cstoc/rng.hpp"

namespace cstoc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(std::span<const double> v) {
  for (double a : v)
    if (!std::isfinite(a)) return false;
  return true;
}

AugmentedPath run(const ProblemSpec& spec, double t, std::span<const double> x, double m,
                  double y, const ControlProgram& control, const MartingaleProgram& mart,
                  const TimeGrid& grid, std::vector<double> dW, std::uint64_t seed,
                  std::uint64_t path_index) {
  const int d = spec.dim;
  const int n = grid.steps();
  if (x.size() != static_cast<std::size_t>(d)) throw SpecError("initial state has wrong dimension");
  if (!all_finite(x) || !std::isfinite(m)) throw SpecError("initial point must be finite");
  if (std::abs(grid.start() - t) > 1e-12 * (1.0 + std::abs(t)))
    throw SpecError("time grid must start at the initial time");
  if (mart.dim() != d) throw SpecError("martingale program has wrong dimension");
  if (dW.size() != static_cast<std::size_t>(n) * d)
    throw SpecError("increment array has wrong size");
  if (spec.log_step && x[0] <= 0.0)
    throw SpecError("log-coordinate stepping needs a positive initial state");

  AugmentedPath path;
  path.grid = grid;
  path.dim = d;
  path.seed = seed;
  path.path_index = path_index;
  path.X.assign(static_cast<std::size_t>(n + 1) * d, 0.0);
  path.M.assign(n + 1, 0.0);
  path.Y.assign(n + 1, 0.0);
  path.dW = std::move(dW);

  for (int r = 0; r < d; ++r) path.X[r] = x[r];
  path.M[0] = m;
  path.Y[0] = std::min(y, spec.has_domain() ? distance_to_complement(spec, x) : kInf);

  const double h = grid.dt();
  std::vector<double> u, a, mu(d), sig(static_cast<std::size_t>(d) * d), xnext(d);

  for (int i = 0; i < n; ++i) {
    StepContext ctx;
    ctx.grid = &grid;
    ctx.step = i;
    ctx.X = std::span<const double>(path.X.data(), static_cast<std::size_t>(i + 1) * d);
    ctx.M = std::span<const double>(path.M.data(), static_cast<std::size_t>(i + 1));
    ctx.Y = std::span<const double>(path.Y.data(), static_cast<std::size_t>(i + 1));
    ctx.dim = d;

    control.value(ctx, u);
    mart.value(ctx, a);

    const auto xi = path.x(i);
    const double si = grid.time(i);
    spec.eval_drift(si, xi, u, mu);
    spec.eval_diffusion(si, xi, u, sig);

    const double* w = path.dW.data() + static_cast<std::size_t>(i) * d;

    if (spec.log_step) {
      // d == 1 by construction: advance z = log X to keep the state positive.
      const double xv = xi[0];
      const double drift_z = mu[0] / xv - 0.5 * sig[0] * sig[0] / (xv * xv);
      const double diff_z = sig[0] / xv;
      xnext[0] = std::exp(std::log(xv) + drift_z * h + diff_z * w[0]);
    } else {
      for (int r = 0; r < d; ++r) {
        double v = xi[r] + mu[r] * h;
        for (int c = 0; c < d; ++c) v += sig[static_cast<std::size_t>(r) * d + c] * w[c];
        xnext[r] = v;
      }
    }

    double dm = 0.0;
    for (int c = 0; c < d; ++c) dm += a[c] * w[c];
    const double mnext = path.M[i] + dm;

    if (!all_finite(xnext) || !std::isfinite(mnext)) {
      path.divergent = true;
      for (int j = i + 1; j <= n; ++j) {
        for (int r = 0; r < d; ++r)
          path.X[static_cast<std::size_t>(j) * d + r] = path.X[static_cast<std::size_t>(i) * d + r];
        path.M[j] = path.M[i];
        path.Y[j] = path.Y[i];
      }
      return path;
    }

    for (int r = 0; r < d; ++r) path.X[static_cast<std::size_t>(i + 1) * d + r] = xnext[r];
    path.M[i + 1] = mnext;
    path.Y[i + 1] =
        std::min(path.Y[i], spec.has_domain() ? distance_to_complement(spec, path.x(i + 1)) : kInf);
  }
  return path;
}

}  // namespace

AugmentedPath simulate(const ProblemSpec& spec, double t, std::span<const double> x, double m,
                       double y, const ControlProgram& control, const MartingaleProgram& mart,
                       const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index) {
  const int d = spec.dim;
  const int n = grid.steps();
  const double root_h = std::sqrt(grid.dt());
  const NormalStream stream(seed);
  std::vector<double> dW(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      dW[static_cast<std::size_t>(i) * d + c] =
          root_h * stream.normal(path_index, static_cast<std::uint32_t>(i),
                                 static_cast<std::uint32_t>(c));
  return run(spec, t, x, m, y, control, mart, grid, std::move(dW), seed, path_index);
}

AugmentedPath simulate_with_increments(const ProblemSpec& spec, double t,
                                       std::span<const double> x, double m, double y,
                                       const ControlProgram& control,
                                       const MartingaleProgram& mart, const TimeGrid& grid,
                                       std::vector<double> dW) {
  return run(spec, t, x, m, y, control, mart, grid, std::move(dW), /*seed=*/0,
             /*path_index=*/0);
}

int first_exit(const AugmentedPath& path, const PathRegion& region) {
  const int n = path.grid.steps();
  for (int i = 0; i <= n; ++i)
    if (!region.contains(path.grid.time(i), path.x(i), path.M[i])) return i;
  return n;
}

}  // namespace cstoc
