#include <doctest.h>

#include <limits>
#include <vector>

#include "cstoc/hamiltonian.hpp"
#include "cstoc/specfile.hpp"

using namespace cstoc;

namespace {

ProblemSpec make_1d(const std::string& drift, const std::string& diffusion,
                    const std::string& controls) {
  const std::string text = "[dynamics]\ndrift = \"" + drift + "\"\ndiffusion = \"" + diffusion +
                           "\"\n[objective]\nreward = \"x1\"\n[controls]\n" + controls;
  return parse_problem_text(text, "ham.toml");
}

const std::vector<double> kX1{0.0};

}  // namespace

TEST_CASE("martingale loading rides to the box edge with a deterministic tie") {
  const ProblemSpec spec = make_1d("u1", "1", "lo = 0\nhi = 0\n");
  HamiltonianParams params;
  params.A = 2.0;
  // p = 0 and q_mm = 1 leave only the concave term -a^2/2: both box ends
  // minimize, and the ascending-a scan reports the lower one.
  const std::vector<double> p{0.0, 0.0};
  const std::vector<double> Q{0.0, 0.0, 0.0, 1.0};
  const auto r = hamiltonian(spec, params, kX1, p, Q);
  CHECK(r.value == doctest::Approx(-2.0));
  CHECK(r.a == std::vector<double>{-2.0});
  CHECK(r.u == std::vector<double>{0.0});
}

TEST_CASE("drift term selects the far control end") {
  const ProblemSpec spec = make_1d("u1", "1", "lo = -1\nhi = 1\nlist = -1;1\n");
  const std::vector<double> p{1.0, 0.0};
  const std::vector<double> Q(4, 0.0);
  const auto r = hamiltonian(spec, HamiltonianParams{}, kX1, p, Q);
  CHECK(r.value == doctest::Approx(-1.0));
  CHECK(r.u == std::vector<double>{1.0});
}

TEST_CASE("interior stationary loading matches the closed form") {
  const ProblemSpec spec = make_1d("0", "1", "lo = 0\nhi = 0\n");
  const std::vector<double> p{0.3, 0.7};
  // q_mm < 0 makes the a-quadratic strictly convex: a* = -q_xm / q_mm.
  const std::vector<double> Q{0.4, 0.6, 0.6, -1.5};
  const auto r = hamiltonian(spec, HamiltonianParams{}, kX1, p, Q);
  CHECK(r.a[0] == doctest::Approx(0.4).epsilon(1e-13));
  // -(1/2 q_xx + a q_xm + 1/2 a^2 q_mm) = -(0.2 + 0.24 - 0.12)
  CHECK(r.value == doctest::Approx(-0.32).epsilon(1e-13));

  // An asymmetric off-diagonal block is symmetrized before use.
  const std::vector<double> Qasym{0.4, 0.2, 1.0, -1.5};
  const auto r2 = hamiltonian(spec, HamiltonianParams{}, kX1, p, Qasym);
  CHECK(r2.a[0] == doctest::Approx(0.4).epsilon(1e-13));
  CHECK(r2.value == doctest::Approx(-0.32).epsilon(1e-13));
}

TEST_CASE("state Hamiltonian with a singleton control evaluates the generator") {
  const ProblemSpec spec = make_1d("u1", "x1", "lo = 0.7\nhi = 0.7\nlist = 0.7\n");
  const std::vector<double> x{2.0};
  const std::vector<double> p{0.5};
  const std::vector<double> Q{0.3};
  const auto r = hamiltonian_state(spec, HamiltonianParams{}, x, p, Q);
  CHECK(r.u == std::vector<double>{0.7});
  CHECK(r.value == doctest::Approx(-(0.7 * 0.5 + 0.5 * 4.0 * 0.3)));
}

TEST_CASE("linear drift program ends at an interval endpoint") {
  const ProblemSpec spec = make_1d("u1", "0", "lo = -1\nhi = 1\n");
  const std::vector<double> p{1.0};
  const std::vector<double> Q{0.0};
  const auto r = hamiltonian_state(spec, HamiltonianParams{}, kX1, p, Q);
  CHECK(r.value == doctest::Approx(-1.0));
  CHECK(r.u == std::vector<double>{1.0});

  const auto s = hamiltonian_state_sup(spec, HamiltonianParams{}, kX1, p, Q);
  CHECK(s.value == doctest::Approx(1.0));
  CHECK(s.u == std::vector<double>{-1.0});
}

TEST_CASE("geometric coefficients at a probe point") {
  const ProblemSpec spec = make_1d("u1*x1", "x1", "lo = 0\nhi = 1\n");
  const std::vector<double> x{2.0};
  const std::vector<double> p{1.0};
  const std::vector<double> Q{-0.25};
  // -(2u - 0.5) over u in [0,1] bottoms out at u = 1.
  const auto r = hamiltonian_state(spec, HamiltonianParams{}, x, p, Q);
  CHECK(r.value == doctest::Approx(-1.5));
  CHECK(r.u == std::vector<double>{1.0});
}

TEST_CASE("parameter and argument validation") {
  const ProblemSpec spec = make_1d("u1", "1", "lo = -1\nhi = 1\n");
  HamiltonianParams bad;
  bad.A = 0.0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = {};
  bad.u_res = 0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = {};
  bad.a_res = 0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = {};
  bad.rho = -0.1;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  CHECK_NOTHROW(HamiltonianParams{}.validate());

  const std::vector<double> Q4(4, 0.0);
  const std::vector<double> p1{1.0};
  // The augmented form needs p of size d+1 and Q of size (d+1)^2.
  CHECK_THROWS_AS(hamiltonian(spec, HamiltonianParams{}, kX1, p1, Q4), SpecError);
  const std::vector<double> p2{1.0, 0.0};
  const std::vector<double> Q1{0.0};
  CHECK_THROWS_AS(hamiltonian_state(spec, HamiltonianParams{}, kX1, p2, Q1), SpecError);
  const std::vector<double> pbad{std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS_AS(hamiltonian(spec, HamiltonianParams{}, kX1, pbad, Q4), SpecError);
}

TEST_CASE("the discount parameter rides along without changing the operator") {
  const ProblemSpec spec = make_1d("u1", "0", "lo = -1\nhi = 1\n");
  const std::vector<double> p{1.0};
  const std::vector<double> Q{0.0};
  HamiltonianParams plain, discounted;
  discounted.rho = 0.5;
  CHECK(hamiltonian_state(spec, plain, kX1, p, Q).value ==
        hamiltonian_state(spec, discounted, kX1, p, Q).value);
}
