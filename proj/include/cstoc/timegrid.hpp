#pragma once

#include <vector>

namespace cstoc {

/// Uniform partition t0 = s_0 < s_1 < ... < s_N = T of a time interval.
/// Endpoints are exact: time(0) == start() and time(steps()) == end() hold
/// bit-for-bit, so terminal-time comparisons never need a tolerance.
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Throws SpecError unless T > t0 and steps >= 1.
  TimeGrid(double t0, double T, int steps);

  double start() const { return t0_; }
  double end() const { return T_; }
  int steps() const { return n_; }
  double dt() const { return (T_ - t0_) / n_; }

  /// Node time for i in [0, steps()].
  double time(int i) const { return i == n_ ? T_ : t0_ + (T_ - t0_) * i / n_; }

  std::vector<double> times() const;

  /// Smallest node index with time(i) >= s (clamped to [0, steps()]).
  int first_node_at_or_after(double s) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double t0_ = 0.0;
  double T_ = 1.0;
  int n_ = 1;
};

}  // namespace cstoc
