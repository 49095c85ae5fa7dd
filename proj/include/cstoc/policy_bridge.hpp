#pragma once

#include <memory>

#include "cstoc/grid.hpp"
#include "cstoc/problem.hpp"
#include "cstoc/programs.hpp"

namespace cstoc {

/// Wraps a solved policy as a feedback control program for the simulator:
/// u(t, x, m) interpolated from the policy lattice (snapped to the nearest
/// node when the control set is a finite list). The program holds shared
/// ownership of the policy.
ControlProgram make_policy_control(std::shared_ptr<const PolicyField> policy,
                                   const ProblemSpec& spec);

/// Same for the martingale loading a(t, x, m); `bound` is the truncation
/// radius the simulator clamps to (normally the solve's truncation_A).
MartingaleProgram make_policy_martingale(std::shared_ptr<const PolicyField> policy,
                                         double bound);

}  // namespace cstoc
