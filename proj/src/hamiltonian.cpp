#include "cstoc/hamiltonian.hpp"

#include <cmath>
#include <limits>

namespace cstoc {

void HamiltonianParams::validate() const {
  if (!(A > 0.0)) throw SpecError("truncation radius A must be > 0");
  if (u_res < 1 || a_res < 1) throw SpecError("control resolutions must be >= 1");
  if (!(rho >= 0.0)) throw SpecError("discount rate must be >= 0");
}

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double a : v)
    if (!std::isfinite(a)) throw SpecError(std::string("non-finite ") + what);
}

/// -( mu.p + 1/2 sum_c (sigma-col-c)^T Q (sigma-col-c) ) for one control.
double minus_generator(int d, std::span<const double> mu, std::span<const double> sig,
                       std::span<const double> p, std::span<const double> Q, int qstride) {
  double drift = 0.0;
  for (int i = 0; i < d; ++i) drift += mu[i] * p[i];
  double trace = 0.0;
  for (int c = 0; c < d; ++c)
    for (int i = 0; i < d; ++i) {
      const double si = sig[static_cast<std::size_t>(i) * d + c];
      if (si == 0.0) continue;
      for (int j = 0; j < d; ++j)
        trace += si * sig[static_cast<std::size_t>(j) * d + c] *
                 Q[static_cast<std::size_t>(i) * qstride + j];
    }
  return -(drift + 0.5 * trace);
}

/// Minimum over [-lim, lim] of j(a) = -b a - half_qmm a^2 (half_qmm = q_mm/2),
/// scanning candidates in ascending order and keeping the first minimum.
void min_coordinate(double b, double q_mm, double lim, double& best_val, double& best_a) {
  const auto j = [&](double a) { return -b * a - 0.5 * q_mm * a * a; };
  best_a = -lim;
  best_val = j(-lim);
  if (q_mm < 0.0) {
    const double interior = -b / q_mm;
    if (interior > -lim && interior < lim) {
      const double v = j(interior);
      if (v < best_val) {
        best_val = v;
        best_a = interior;
      }
    }
  }
  const double v = j(lim);
  if (v < best_val) {
    best_val = v;
    best_a = lim;
  }
}

}  // namespace

HamiltonianResult hamiltonian(const ProblemSpec& spec, const HamiltonianParams& params,
                              std::span<const double> x, std::span<const double> p,
                              std::span<const double> Q, double t) {
  params.validate();
  const int d = spec.dim;
  if (p.size() != static_cast<std::size_t>(d) + 1 ||
      Q.size() != static_cast<std::size_t>(d + 1) * (d + 1))
    throw SpecError("augmented Hamiltonian needs p of size d+1 and Q of size (d+1)^2");
  check_finite(x, "state");
  check_finite(p, "gradient");
  check_finite(Q, "Hessian");

  const double q_mm = Q[static_cast<std::size_t>(d) * (d + 1) + d];
  std::vector<double> mu(d), sig(static_cast<std::size_t>(d) * d), b(d), a_best(d);
  HamiltonianResult best;
  best.value = std::numeric_limits<double>::infinity();

  for (const auto& u : spec.controls.grid(params.u_res)) {
    spec.eval_drift(t, x, u, mu);
    spec.eval_diffusion(t, x, u, sig);
    const double base = minus_generator(d, mu, sig, p, Q, d + 1);

    // b_i = (sigma^T q_xm)_i with the off-diagonal block symmetrized.
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int r = 0; r < d; ++r) {
        const double q_xm = 0.5 * (Q[static_cast<std::size_t>(r) * (d + 1) + d] +
                                   Q[static_cast<std::size_t>(d) * (d + 1) + r]);
        s += sig[static_cast<std::size_t>(r) * d + i] * q_xm;
      }
      b[i] = s;
    }

    double total = base;
    for (int i = 0; i < d; ++i) {
      double v, a;
      min_coordinate(b[i], q_mm, params.A, v, a);
      total += v;
      a_best[i] = a;
    }

    if (total < best.value) {
      best.value = total;
      best.u = u;
      best.a = a_best;
    }
  }
  return best;
}

namespace {

HamiltonianStateResult state_extremum(const ProblemSpec& spec, const HamiltonianParams& params,
                                      std::span<const double> x, std::span<const double> p,
                                      std::span<const double> Q, double t, bool maximize) {
  params.validate();
  const int d = spec.dim;
  if (p.size() != static_cast<std::size_t>(d) ||
      Q.size() != static_cast<std::size_t>(d) * d)
    throw SpecError("state Hamiltonian needs p of size d and Q of size d^2");
  check_finite(x, "state");
  check_finite(p, "gradient");
  check_finite(Q, "Hessian");

  std::vector<double> mu(d), sig(static_cast<std::size_t>(d) * d);
  HamiltonianStateResult best;
  best.value = maximize ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
  for (const auto& u : spec.controls.grid(params.u_res)) {
    spec.eval_drift(t, x, u, mu);
    spec.eval_diffusion(t, x, u, sig);
    const double v = minus_generator(d, mu, sig, p, Q, d);
    if (maximize ? v > best.value : v < best.value) {
      best.value = v;
      best.u = u;
    }
  }
  return best;
}

}  // namespace

HamiltonianStateResult hamiltonian_state(const ProblemSpec& spec,
                                         const HamiltonianParams& params,
                                         std::span<const double> x, std::span<const double> p,
                                         std::span<const double> Q, double t) {
  return state_extremum(spec, params, x, p, Q, t, /*maximize=*/false);
}

HamiltonianStateResult hamiltonian_state_sup(const ProblemSpec& spec,
                                             const HamiltonianParams& params,
                                             std::span<const double> x,
                                             std::span<const double> p,
                                             std::span<const double> Q, double t) {
  return state_extremum(spec, params, x, p, Q, t, /*maximize=*/true);
}

}  // namespace cstoc
