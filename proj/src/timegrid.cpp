#include "cstoc/timegrid.hpp"

#include <cmath>

#include "cstoc/problem.hpp"

namespace cstoc {

TimeGrid::TimeGrid(double t0, double T, int steps) : t0_(t0), T_(T), n_(steps) {
  if (!(T > t0)) throw SpecError("time grid needs end > start");
  if (steps < 1) throw SpecError("time grid needs at least one step");
  if (!std::isfinite(t0) || !std::isfinite(T)) throw SpecError("time grid bounds must be finite");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out(n_ + 1);
  for (int i = 0; i <= n_; ++i) out[i] = time(i);
  return out;
}

int TimeGrid::first_node_at_or_after(double s) const {
  if (s <= t0_) return 0;
  if (s > T_) return n_;
  const int guess = static_cast<int>(std::ceil((s - t0_) / dt() - 1e-12));
  // The closed-form guess can be off by one at representation boundaries.
  int i = std::max(0, std::min(n_, guess));
  while (i > 0 && time(i - 1) >= s) --i;
  while (i < n_ && time(i) < s) ++i;
  return i;
}

}  // namespace cstoc
