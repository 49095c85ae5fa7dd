// Compares the serial and OpenMP sweep kernels on the same problems: wall
// time for each, speedup, and a bitwise check that both paths produce the
// same field.  Usage:  cstoc_bench [nx] [nm]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "cstoc/solvers.hpp"
#include "cstoc/specfile.hpp"

using namespace cstoc;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_bits(const ValueField& a, const ValueField& b) {
  if (a.value.size() != b.value.size() || a.masked != b.masked) return false;
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    if (a.value[i] != b.value[i]) return false;
  }
  return true;
}

struct Timing {
  double serial = 0.0;
  double parallel = 0.0;
  bool identical = false;
};

template <typename Solve>
Timing time_both(Solve&& solve) {
  Timing t;
  SolverOptions opts;
  opts.record_policy = false;
  opts.parallel = false;
  auto t0 = std::chrono::steady_clock::now();
  const ValueField serial_field = solve(opts);
  t.serial = seconds_since(t0);
  opts.parallel = true;
  t0 = std::chrono::steady_clock::now();
  const ValueField parallel_field = solve(opts);
  t.parallel = seconds_since(t0);
  t.identical = same_bits(serial_field, parallel_field);
  return t;
}

void report(const char* name, const Timing& t) {
  std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx   %s\n", name,
              t.serial, t.parallel, t.parallel > 0.0 ? t.serial / t.parallel : 0.0,
              t.identical ? "fields identical" : "FIELDS DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  const int nx = argc > 1 ? std::atoi(argv[1]) : 161;
  const int nm = argc > 2 ? std::atoi(argv[2]) : 41;

  const ProblemSpec spec = parse_problem_text(
      "[dynamics]\ndrift = \"u1\"\ndiffusion = \"0.2\"\n[objective]\nreward = \"x1\"\n"
      "[constraint]\nconstraint = \"x1\"\n[controls]\nlo = -1\nhi = 1\n",
      "bench.toml");
  HamiltonianParams hp;
  hp.u_res = 11;
  const TimeGrid tg(0.0, 1.0, 100);
  const Axis xa{-2.0, 2.0, nx};
  const Axis ma{-1.0, 2.0, nm};

  std::printf("lattice: %d time steps, %d state nodes, %d budget nodes\n", tg.steps(), nx,
              nm);

  const Timing floor_t = time_both([&](const SolverOptions& o) {
    return solve_constraint_floor(spec, Grid::make(tg, xa), hp, o);
  });
  report("constraint floor", floor_t);

  const Timing plain_t = time_both([&](const SolverOptions& o) {
    return solve_unconstrained(spec, Grid::make(tg, xa), hp, o).value;
  });
  report("plain value", plain_t);

  const Timing budget_t = time_both([&](const SolverOptions& o) {
    return solve_expectation_constrained(spec, Grid::make(tg, xa, ma), hp, o).value;
  });
  report("budget-augmented value", budget_t);

  const bool all_same = floor_t.identical && plain_t.identical && budget_t.identical;
  std::printf("%s\n", all_same ? "OK: parallel kernels reproduce the serial fields bitwise"
                               : "ERROR: kernel outputs disagree");
  return all_same ? 0 : 1;
}
