#include <doctest.h>

#include <string>

#include "cstoc/specfile.hpp"
#include "cstoc/validate.hpp"

using namespace cstoc;

namespace {

ProblemSpec lq_problem() {
  return parse_problem_text(
      "[dynamics]\ndrift = \"u1\"\ndiffusion = \"0.2\"\n"
      "[objective]\nreward = \"-(x1 - 1)^2\"\n"
      "[constraint]\nconstraint = \"x1\"\n"
      "[controls]\nlo = -1\nhi = 1\n",
      "lq.toml");
}

const CheckResult* find(const ValidationReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("benign linear problem validates cleanly") {
  const auto report = validate_problem(lq_problem(), {}, 1);
  CHECK(report.all_pass());
  const auto* lip = find(report, "lipschitz_mu");
  REQUIRE(lip != nullptr);
  CHECK(lip->evidence == doctest::Approx(0.0));  // drift constant in x
  const auto* g = find(report, "linear_growth_sigma");
  REQUIRE(g != nullptr);
  CHECK(g->status == CheckStatus::Pass);
}

TEST_CASE("superlinear diffusion triggers the growth warning") {
  const ProblemSpec spec = parse_problem_text(
      "[dynamics]\ndrift = \"0\"\ndiffusion = \"x1^2\"\n"
      "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n",
      "quad.toml");
  ValidationBox box;
  box.lo = {-10.0};
  box.hi = {10.0};
  const auto report = validate_problem(spec, box, 1);
  const auto* g = find(report, "linear_growth_sigma");
  REQUIRE(g != nullptr);
  CHECK(g->status == CheckStatus::Warn);
  CHECK_FALSE(report.all_pass());
  CHECK_FALSE(report.any_fail());  // warnings are not failures
}

TEST_CASE("validation text is deterministic for a fixed seed") {
  const auto a = validate_problem(lq_problem(), {}, 7, 200);
  const auto b = validate_problem(lq_problem(), {}, 7, 200);
  CHECK(a.text() == b.text());
  CHECK(a.text().find("lipschitz_mu") != std::string::npos);
}

TEST_CASE("delta sign checks the declared shape against the expression") {
  const ProblemSpec good = parse_problem_text(
      "[dynamics]\ndrift = \"0\"\ndiffusion = \"1\"\n"
      "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n"
      "[domain]\ndelta = \"x1\"\nkind = halfspace\nnormal = 1\n",
      "hs.toml");
  ValidationBox box;
  box.lo = {-1.0};
  box.hi = {1.0};
  const auto ok = validate_problem(good, box, 3);
  const auto* s = find(ok, "delta_sign");
  REQUIRE(s != nullptr);
  CHECK(s->status == CheckStatus::Pass);

  // delta never positive on the box: the domain misses the probe region.
  const ProblemSpec empty = parse_problem_text(
      "[dynamics]\ndrift = \"0\"\ndiffusion = \"1\"\n"
      "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n"
      "[domain]\ndelta = \"-1 - x1^2\"\nkind = generic\n",
      "void.toml");
  const auto bad = validate_problem(empty, box, 3);
  const auto* t = find(bad, "delta_sign");
  REQUIRE(t != nullptr);
  CHECK(t->status == CheckStatus::Fail);
  CHECK(bad.any_fail());

  // Declared half-space disagrees with the expression's sign.
  const ProblemSpec mism = parse_problem_text(
      "[dynamics]\ndrift = \"0\"\ndiffusion = \"1\"\n"
      "[objective]\nreward = \"0\"\n[controls]\nlo = 0\nhi = 0\n"
      "[domain]\ndelta = \"0 - x1\"\nkind = halfspace\nnormal = 1\n",
      "mm.toml");
  const auto m = validate_problem(mism, box, 3);
  const auto* u = find(m, "delta_sign");
  REQUIRE(u != nullptr);
  CHECK(u->status == CheckStatus::Fail);
}

TEST_CASE("structural errors throw instead of reporting") {
  ProblemSpec spec = lq_problem();
  spec.horizon = 0.0;
  CHECK_THROWS_AS(validate_problem(spec, {}, 1), SpecError);
}
