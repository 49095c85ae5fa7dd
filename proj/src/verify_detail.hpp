#pragma once

#include "cstoc/simulate.hpp"
#include "cstoc/verify.hpp"

namespace cstoc::detail {

/// Node index of tau on a completed path (tau-and-T convention: undecided
/// rules resolve to the terminal node).
int resolve_tau_node(const AugmentedPath& path, const TauRule& tau);

/// True when interpolating the field at (t, x, m) would touch a masked node
/// before the clamp-up convention rescues it. Pure-state fields check their
/// single level.
bool rests_on_masked(const ValueField& field, double t, double x, double m);

/// Discretization allowance: `cells` times the largest spacing of the field.
double grid_allowance(const ValueField& field, double cells);

/// The shared dead-band rule: fail only below -(3 se + allowance), pass when
/// the noise is small enough to tell, inconclusive otherwise.
Verdict verdict_from(double slack, double se, double allowance);

/// Simulation grid from `t` to the horizon matching the field's step width.
TimeGrid sim_grid(const ValueField& field, double t, double horizon);

}  // namespace cstoc::detail
