#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <vector>

#include "cstoc/problem.hpp"
#include "cstoc/specfile.hpp"

using namespace cstoc;

TEST_CASE("control grid 1d spacing") {
  const ControlSet u = ControlSet::box1(-1.0, 1.0, 5);
  const auto g = u.grid(5);
  REQUIRE(g.size() == 5);
  const double want[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int i = 0; i < 5; ++i) CHECK(g[i][0] == doctest::Approx(want[i]).epsilon(1e-15));
}

TEST_CASE("control grid lexicographic order, axis 0 slowest") {
  ControlSet u;
  u.lo = {0.0, 10.0};
  u.hi = {1.0, 11.0};
  const auto g = u.grid(2);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == std::vector<double>{0.0, 10.0});
  CHECK(g[1] == std::vector<double>{0.0, 11.0});
  CHECK(g[2] == std::vector<double>{1.0, 10.0});
  CHECK(g[3] == std::vector<double>{1.0, 11.0});
}

TEST_CASE("control grid collapses degenerate axes to midpoints") {
  ControlSet u;
  u.lo = {-2.0, 3.0};
  u.hi = {2.0, 3.0};
  const auto g = u.grid(3);
  REQUIRE(g.size() == 3);  // degenerate axis contributes one point
  CHECK(g[0] == std::vector<double>{-2.0, 3.0});
  CHECK(g[1] == std::vector<double>{0.0, 3.0});
  CHECK(g[2] == std::vector<double>{2.0, 3.0});
  const auto mid = u.grid(1);
  REQUIRE(mid.size() == 1);
  CHECK(mid[0] == std::vector<double>{0.0, 3.0});
}

TEST_CASE("finite control list is used verbatim") {
  ControlSet u = ControlSet::box1(-1.0, 1.0);
  u.points = {{-1.0}, {0.25}, {1.0}};
  const auto g = u.grid(99);
  REQUIRE(g.size() == 3);
  CHECK(g[1][0] == 0.25);
  CHECK(u.finite_list());
}

TEST_CASE("control clamp projects onto the box") {
  const ControlSet u = ControlSet::box1(-1.0, 1.0);
  CHECK(u.clamp({5.0})[0] == 1.0);
  CHECK(u.clamp({-5.0})[0] == -1.0);
  CHECK(u.clamp({0.3})[0] == 0.3);
}

TEST_CASE("control set validation rejects bad boxes and stray list points") {
  ControlSet bad;
  bad.lo = {1.0};
  bad.hi = {-1.0};
  CHECK_THROWS_AS(bad.validate(), SpecError);

  ControlSet off = ControlSet::box1(-1.0, 1.0);
  off.points = {{2.0}};
  CHECK_THROWS_AS(off.validate(), SpecError);

  ControlSet mism = ControlSet::box1(-1.0, 1.0);
  mism.points = {{0.0, 0.0}};
  CHECK_THROWS_AS(mism.validate(), SpecError);
}

namespace {

const char* kFullText = R"ini(# demo problem
[dynamics]
name = "demo"
dim = 2
horizon = 2.5
drift1 = "u1"
drift2 = "-x2"
diffusion11 = "0.2"
diffusion2 = "0.3 * x2"   # diagonal shorthand

[objective]
reward = "-(x1 - 1)^2"
discount = 0.05

[constraint]
constraint = "indicator_leq0(-x1)"

[controls]
lo = -1, 0
hi = 1, 0
points_per_axis = 5

[domain]
delta = "x1 + 4"
kind = halfspace
normal = 1, 0
offset = -4
feedback_hat1 = "0"
feedback_hat2 = "0"

[assumptions]
f_bounded = true
)ini";

}  // namespace

TEST_CASE("problem file parses every section") {
  const ProblemSpec spec = parse_problem_text(kFullText, "demo.toml");
  CHECK(spec.name == "demo");
  CHECK(spec.dim == 2);
  CHECK(spec.horizon == 2.5);
  CHECK(spec.discount == 0.05);
  CHECK(spec.drift[0].str() == "u1");
  CHECK(spec.diffusion[0][0].str() == "0.2");
  CHECK(spec.diffusion[0][1].str() == "0");   // off-diagonal defaults to zero
  CHECK(spec.diffusion[1][1].str() == "0.3*x2");
  CHECK(spec.controls.dim() == 2);
  CHECK(spec.controls.points_per_axis == 5);
  REQUIRE(spec.has_domain());
  CHECK(spec.domain->kind == DomainKind::HalfSpace);
  CHECK(spec.domain->offset == -4.0);
  CHECK(spec.feedback_hat.size() == 2);
  CHECK(spec.assumptions.f_bounded);
  CHECK(spec.assumptions.g_usc);  // default

  std::vector<double> mu(2), x{0.5, 2.0}, u{0.7, 0.0};
  spec.eval_drift(0.0, x, u, mu);
  CHECK(mu[0] == 0.7);
  CHECK(mu[1] == -2.0);
  // indicator_leq0(-x1) is 1 exactly when x1 >= 0.
  CHECK(spec.eval_constraint(std::vector<double>{0.5, 0.0}) == 1.0);
  CHECK(spec.eval_constraint(std::vector<double>{-0.5, 0.0}) == 0.0);
}

TEST_CASE("constraint defaults to zero when the section is absent") {
  const char* text = R"(
[dynamics]
drift = "0"
diffusion = "1"
[objective]
reward = "x1"
[controls]
lo = 0
hi = 0
)";
  const ProblemSpec spec = parse_problem_text(text, "nc.toml");
  CHECK(spec.constraint.str() == "0");
  CHECK(spec.eval_constraint(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("problem file errors carry line numbers") {
  const char* dup = "[dynamics]\ndrift = \"0\"\ndrift = \"1\"\n";
  try {
    parse_problem_text(dup, "dup.toml");
    FAIL("expected SpecFileError");
  } catch (const SpecFileError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("dup.toml:3") != std::string::npos);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }

  const char* unknown = "[dynamics]\ndrift = \"0\"\ndiffusion = \"1\"\nbogus = 7\n"
                        "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n";
  CHECK_THROWS_AS(parse_problem_text(unknown, "u.toml"), SpecFileError);

  const char* badsec = "[physics]\n";
  CHECK_THROWS_AS(parse_problem_text(badsec, "s.toml"), SpecFileError);

  const char* badexpr = "[dynamics]\ndrift = \"x1 *\"\ndiffusion = \"1\"\n"
                        "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n";
  try {
    parse_problem_text(badexpr, "e.toml");
    FAIL("expected SpecFileError");
  } catch (const SpecFileError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("well-formedness rejects out-of-range variables") {
  const char* x2_in_1d = "[dynamics]\ndrift = \"x2\"\ndiffusion = \"1\"\n"
                         "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n";
  CHECK_THROWS(parse_problem_text(x2_in_1d, "bad.toml"));

  const char* u_in_reward = "[dynamics]\ndrift = \"0\"\ndiffusion = \"1\"\n"
                            "[objective]\nreward = \"u1\"\n[controls]\nlo = 0\nhi = 0\n";
  CHECK_THROWS(parse_problem_text(u_in_reward, "bad2.toml"));

  const char* bad_T = "[dynamics]\nhorizon = -1\ndrift = \"0\"\ndiffusion = \"1\"\n"
                      "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n";
  CHECK_THROWS(parse_problem_text(bad_T, "bad3.toml"));
}

TEST_CASE("problem name defaults to the file stem") {
  const char* path = "tmp_name_check.toml";
  {
    std::ofstream out(path);
    out << "[dynamics]\ndrift = \"0\"\ndiffusion = \"1\"\n"
           "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n";
  }
  const ProblemSpec spec = load_problem_file(path);
  CHECK(spec.name == "tmp_name_check");
  std::remove(path);
}

TEST_CASE("feedback laws evaluate and clamp to the control box") {
  const char* text = R"(
[dynamics]
drift = "u1"
diffusion = "0"
[objective]
reward = "x1"
[controls]
lo = -1
hi = 1
[domain]
delta = "x1"
kind = halfspace
normal = 1
feedback_hat = "2 * x1"
)";
  const ProblemSpec spec = parse_problem_text(text, "fb.toml");
  const auto u = spec.eval_feedback_hat(std::vector<double>{3.0});
  REQUIRE(u.size() == 1);
  CHECK(u[0] == 1.0);  // 6 clamped to the box
  const auto v = spec.eval_feedback_hat(std::vector<double>{0.25});
  CHECK(v[0] == 0.5);
}
