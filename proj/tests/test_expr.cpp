#include "cstoc/expr.hpp"

#include <doctest.h>

#include <cmath>

using cstoc::EvalContext;
using cstoc::Expression;

namespace {

double eval1(const std::string& text, double x1 = 0.0, double u1 = 0.0,
             double t = 0.0, double y = 0.0, double m = 0.0) {
  const double xs[] = {x1};
  const double us[] = {u1};
  EvalContext ctx;
  ctx.t = t;
  ctx.x = xs;
  ctx.u = us;
  ctx.y = y;
  ctx.m = m;
  return Expression::parse(text).eval(ctx);
}

}  // namespace

TEST_CASE("identity and arithmetic") {
  CHECK(eval1("u1", 0.0, 7.5) == 7.5);
  CHECK(eval1("x1*u1 - 0.5*x1", 2.0, 1.0) == doctest::Approx(1.0));
  CHECK(eval1("1 + 2*3^2") == doctest::Approx(19.0));
  CHECK(eval1("2^3^2") == doctest::Approx(512.0));  // right-associative power
  CHECK(eval1("-x1^2", 3.0) == doctest::Approx(-9.0));
  CHECK(eval1("10 - 4 - 3") == doctest::Approx(3.0));
  CHECK(eval1("12/3/2") == doctest::Approx(2.0));
  CHECK(eval1("2^-1") == doctest::Approx(0.5));
  CHECK(eval1("min(3, max(1, 2))") == doctest::Approx(2.0));
  CHECK(eval1("abs(-4.5)") == doctest::Approx(4.5));
  CHECK(eval1("tanh(0)") == 0.0);
  CHECK(eval1("sqrt(16)") == doctest::Approx(4.0));
  CHECK(eval1("exp(log(5))") == doctest::Approx(5.0));
}

TEST_CASE("indicator and normal cdf primitives") {
  CHECK(eval1("indicator_leq0(y)", 0, 0, 0, -0.1) == 1.0);
  CHECK(eval1("indicator_leq0(y)", 0, 0, 0, 0.5) == 0.0);
  CHECK(eval1("indicator_leq0(y)", 0, 0, 0, 0.0) == 1.0);  // closed at 0
  CHECK(eval1("normal_cdf(0)") == doctest::Approx(0.5));
  // Reference value of the standard normal CDF at -1.
  CHECK(eval1("normal_cdf(-1)") == doctest::Approx(0.15865525393145705).epsilon(1e-12));
  CHECK(eval1("normal_cdf(1) + normal_cdf(-1)") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("syntax errors carry a character offset") {
  CHECK_THROWS_AS(Expression::parse(""), cstoc::ParseError);
  try {
    Expression::parse("x1*");
    FAIL("expected ParseError");
  } catch (const cstoc::ParseError& e) {
    CHECK(e.offset == 3);
  }
  try {
    Expression::parse("foo + 1");
    FAIL("expected ParseError");
  } catch (const cstoc::ParseError& e) {
    CHECK(e.offset == 0);
  }
  CHECK_THROWS_AS(Expression::parse("x0"), cstoc::ParseError);   // indices start at 1
  CHECK_THROWS_AS(Expression::parse("x"), cstoc::ParseError);    // bare x is not a variable
  CHECK_THROWS_AS(Expression::parse("min(1)"), cstoc::ParseError);
  CHECK_THROWS_AS(Expression::parse("(1+2"), cstoc::ParseError);
  CHECK_THROWS_AS(Expression::parse("1 2"), cstoc::ParseError);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(eval1("1/x1", 0.0), cstoc::EvalError);
  CHECK_THROWS_AS(eval1("log(x1)", 0.0), cstoc::EvalError);
  CHECK_THROWS_AS(eval1("log(x1)", -2.0), cstoc::EvalError);
  CHECK_THROWS_AS(eval1("sqrt(x1)", -1.0), cstoc::EvalError);
  CHECK_THROWS_AS(eval1("x1^0.5", -1.0), cstoc::EvalError);
  CHECK_THROWS_AS(eval1("x2", 1.0), cstoc::EvalError);  // unbound: only x1 given
  CHECK(eval1("x1^2", -3.0) == doctest::Approx(9.0));   // integer exponent is fine
}

TEST_CASE("print round-trips structurally and textually") {
  const char* samples[] = {
      "u1",
      "x1*u1 - 0.5*x1",
      "-x1^2 + 3*(x1 - u1)/2",
      "min(x1, 1 - x1)",
      "indicator_leq0(y)",
      "normal_cdf(-(x1 + 1))",
      "2^-1",
      "1 - (2 - 3)",
      "x1/(u1 + 1)",
      "-(x1 + 1)",
      "abs(x1)*tanh(u1) + exp(-t)*m",
  };
  for (const char* s : samples) {
    CAPTURE(s);
    const Expression e1 = Expression::parse(s);
    const std::string printed = e1.str();
    const Expression e2 = Expression::parse(printed);
    CHECK(e1 == e2);
    CHECK(e2.str() == printed);  // print∘parse is a fixed point
  }
}

TEST_CASE("printed form preserves values on random bindings") {
  const char* samples[] = {
      "x1*u1 - 0.5*x1/(1 + x1^2)",
      "-(x1 - u1)^3 + m*t - y",
      "max(x1, -x1) - abs(x1)",
  };
  for (const char* s : samples) {
    const Expression e1 = Expression::parse(s);
    const Expression e2 = Expression::parse(e1.str());
    for (double v = -2.0; v <= 2.0; v += 0.37) {
      const double xs[] = {v};
      const double us[] = {0.3 * v};
      EvalContext ctx;
      ctx.t = 0.5;
      ctx.x = xs;
      ctx.u = us;
      ctx.y = 1.0 + v;
      ctx.m = -v;
      CHECK(e1.eval(ctx) == doctest::Approx(e2.eval(ctx)).epsilon(1e-15));
    }
  }
}

TEST_CASE("variable usage queries") {
  const Expression e = Expression::parse("x2*u1 + t");
  CHECK(e.max_x_index() == 2);
  CHECK(e.max_u_index() == 1);
  CHECK(e.uses_t());
  CHECK_FALSE(e.uses_y());
  CHECK_FALSE(e.uses_m());
  CHECK(Expression::parse("0").is_constant(0.0));
  CHECK_FALSE(Expression::parse("x1").is_constant(0.0));
}
