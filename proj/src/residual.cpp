#include <array>
#include <cmath>
#include <optional>

#include "cstoc/solvers.hpp"

namespace cstoc {

namespace {

bool stencil_clear(const ValueField& f, int it, int ix, int im, bool with_m) {
  for (int dt = -1; dt <= 1; ++dt) {
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dm = with_m ? -1 : 0; dm <= (with_m ? 1 : 0); ++dm) {
        if (f.is_masked(it + dt, ix + dx, im + dm)) return false;
      }
    }
  }
  return true;
}

}  // namespace

std::optional<double> viscosity_residual(const ProblemSpec& spec,
                                         const HamiltonianParams& params,
                                         const ValueField& field, int it, int ix, int im) {
  const Grid& grid = field.grid;
  const bool with_m = grid.has_m();
  if (it < 1 || it > grid.nt() - 1) return std::nullopt;
  if (ix < 1 || ix > grid.nx() - 2) return std::nullopt;
  if (with_m && (im < 1 || im > grid.nm() - 2)) return std::nullopt;
  if (!with_m && im != 0) return std::nullopt;
  if (!stencil_clear(field, it, ix, im, with_m)) return std::nullopt;

  const double ht = grid.h_t();
  const double hx = grid.h_x();
  const double vc = field.at(it, ix, im);
  const double dt_v = (field.at(it + 1, ix, im) - field.at(it - 1, ix, im)) / (2.0 * ht);
  double vx = (field.at(it, ix + 1, im) - field.at(it, ix - 1, im)) / (2.0 * hx);
  double vxx = (field.at(it, ix + 1, im) - 2.0 * vc + field.at(it, ix - 1, im)) / (hx * hx);

  double xp = grid.x.at(ix);
  if (field.meta.log_x) {
    // The axis holds z = log x; rewrite the derivatives in x itself.
    const double x_orig = std::exp(xp);
    const double vz = vx;
    const double vzz = vxx;
    vx = vz / x_orig;
    vxx = (vzz - vz) / (x_orig * x_orig);
    xp = x_orig;
  }

  const double t = grid.time.time(it);
  const double rho = field.meta.discount;
  double ham = 0.0;
  if (field.meta.equation == "expectation_constrained") {
    const double hm = grid.h_m();
    double vm = (field.at(it, ix, im + 1) - field.at(it, ix, im - 1)) / (2.0 * hm);
    double vmm =
        (field.at(it, ix, im + 1) - 2.0 * vc + field.at(it, ix, im - 1)) / (hm * hm);
    double vxm = (field.at(it, ix + 1, im + 1) + field.at(it, ix - 1, im - 1) -
                  field.at(it, ix + 1, im - 1) - field.at(it, ix - 1, im + 1)) /
                 (4.0 * hx * hm);
    if (field.meta.log_x) {
      vxm = vxm / xp;  // z-cross term back to x
    }
    const std::array<double, 2> p{vx, vm};
    const std::array<double, 4> Q{vxx, vxm, vxm, vmm};
    ham = hamiltonian(spec, params, std::span<const double>(&xp, 1), p, Q, t).value;
  } else {
    const std::array<double, 1> p{vx};
    const std::array<double, 1> Q{vxx};
    if (field.meta.equation == "constraint_floor") {
      ham = hamiltonian_state_sup(spec, params, std::span<const double>(&xp, 1), p, Q, t)
                .value;
    } else {
      ham = hamiltonian_state(spec, params, std::span<const double>(&xp, 1), p, Q, t).value;
    }
  }
  return -dt_v + ham + rho * vc;
}

}  // namespace cstoc
