#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cstoc/timegrid.hpp"

namespace cstoc {

/// Sentinel carried by masked nodes (value "minus infinity": the supremum
/// over an empty control set). Finite so that exports and comparisons stay
/// well-defined; never fed into stencil arithmetic.
inline constexpr double kNegInf = -1e300;

/// True finite field value, i.e. not the masked sentinel.
inline bool is_neg_inf(double v) { return v <= 0.5 * kNegInf; }

/// Uniform node axis lo = z_0 < ... < z_{n-1} = hi.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int nodes = 2;

  double h() const { return (hi - lo) / (nodes - 1); }
  double at(int i) const { return i == nodes - 1 ? hi : lo + (hi - lo) * i / (nodes - 1); }
  /// Largest node index with at(i) <= z, clamped to [0, nodes-2].
  int cell(double z) const;
  void validate() const;  // throws SpecError
};

/// Solver lattice: a time axis, one spatial axis (the solvers operate on
/// one-dimensional state problems), and an optional constraint-level axis m.
struct Grid {
  TimeGrid time;
  Axis x;
  std::optional<Axis> m;

  static Grid make(TimeGrid t, Axis x_axis);
  static Grid make(TimeGrid t, Axis x_axis, Axis m_axis);

  bool has_m() const { return m.has_value(); }
  int nx() const { return x.nodes; }
  int nm() const { return has_m() ? m->nodes : 1; }
  int nt() const { return time.steps(); }
  double h_t() const { return time.dt(); }
  double h_x() const { return x.h(); }
  double h_m() const { return m->h(); }

  /// Nodes per time slice and in total (all slices).
  std::size_t slice_nodes() const { return static_cast<std::size_t>(nx()) * nm(); }
  std::size_t total_nodes() const { return slice_nodes() * (nt() + 1); }

  std::size_t index(int it, int ix, int im = 0) const {
    return (static_cast<std::size_t>(it) * nx() + ix) * nm() + im;
  }
};

/// Provenance and numerical-convention record attached to a solved field.
struct FieldMetadata {
  std::string equation;        // constraint_floor | expectation_constrained |
                               // state_constrained | unconstrained
  double truncation_A = 0.0;   // martingale box radius
  int u_resolution = 0;        // control grid points per axis
  int a_resolution = 0;        // max aligned-slope index for the m-coupling
  double discount = 0.0;
  double mask_margin = 0.0;
  int substeps = 1;            // internal CFL subdivisions per stored step
  std::string lateral;         // clamp | extrapolate
  bool log_x = false;          // spatial axis holds log(state)
  int pure_m_span = 0;         // m-cells spanned by the pure-m diffusion stencil
  std::string mask_note;       // mask-edge convention, surfaced in reports
};

/// A scalar field on the lattice with a per-node admissibility mask. Masked
/// nodes always carry kNegInf; unmasked nodes are always finite.
struct ValueField {
  Grid grid;
  std::vector<double> value;
  std::vector<std::uint8_t> masked;
  FieldMetadata meta;

  static ValueField zeros(Grid g);

  double at(int it, int ix, int im = 0) const { return value[grid.index(it, ix, im)]; }
  bool is_masked(int it, int ix, int im = 0) const { return masked[grid.index(it, ix, im)] != 0; }
  void set(int it, int ix, int im, double v) { value[grid.index(it, ix, im)] = v; }
  void set_masked(int it, int ix, int im) {
    const std::size_t k = grid.index(it, ix, im);
    value[k] = kNegInf;
    masked[k] = 1;
  }

  /// Smallest unmasked m-index in the (it, ix) column, or nm() if none.
  int lowest_unmasked(int it, int ix) const;

  /// Invariant check: masked <=> sentinel; unmasked => finite. Throws.
  void check_consistent() const;
};

/// Per-node minimizing controls recorded while solving: u* on the control
/// grid and, for the expectation-constrained equation, the martingale
/// loading a*. Stored per time step (slice it covers [t_it, t_{it+1})).
struct PolicyField {
  Grid grid;
  int u_dim = 0;
  int a_dim = 0;                      // 0 when the equation has no martingale control
  std::vector<double> u;              // nt x nx x nm x u_dim
  std::vector<double> a;              // nt x nx x nm x a_dim
  std::vector<std::uint8_t> defined;  // nt x nx x nm
  std::string tie_break = "first-found in (u, a) candidate order";

  std::size_t node(int it, int ix, int im = 0) const {
    return (static_cast<std::size_t>(it) * grid.nx() + ix) * grid.nm() + im;
  }
  std::span<const double> u_at(int it, int ix, int im = 0) const {
    return {u.data() + node(it, ix, im) * u_dim, static_cast<std::size_t>(u_dim)};
  }
  std::span<const double> a_at(int it, int ix, int im = 0) const {
    return {a.data() + node(it, ix, im) * a_dim, static_cast<std::size_t>(a_dim)};
  }
};

/// Mask-aware multilinear interpolation of a solved field at (t, x, m).
/// Inside each bracketing (t, x) column the m-coordinate is clamped upward
/// to the lowest unmasked level before interpolating, which preserves
/// monotonicity in m; a fully masked column makes the result kNegInf.
/// Fields solved on a log axis take the query in original coordinates.
/// Queries are clamped to the grid box.
double field_value(const ValueField& field, double t, double x, double m = 0.0);

/// True when every (t, x)-bracketing column is masked at or above the query
/// level, i.e. the interpolated value would rest on masked data.
bool field_masked_at(const ValueField& field, double t, double x, double m = 0.0);

/// Interpolated policy lookup; `nearest` snaps to the closest node instead
/// of blending (used for finite control lists). Values are not clamped here.
std::vector<double> policy_u_at(const PolicyField& policy, double t, double x, double m,
                                bool nearest);
std::vector<double> policy_a_at(const PolicyField& policy, double t, double x, double m,
                                bool nearest);

}  // namespace cstoc
