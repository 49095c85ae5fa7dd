#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cstoc {

/// Thrown by Expression::parse. `offset` is the 0-based character position
/// in the input where parsing failed.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t offset_)
      : std::runtime_error(what), offset(offset_) {}
  std::size_t offset;
};

/// Thrown by Expression::eval on domain errors (log of a nonpositive value,
/// division by zero, ...) or unbound variables.
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Variable bindings for evaluation. `x` and `u` are indexed from 1 in the
/// source language (x1 reads x[0]).
struct EvalContext {
  double t = 0.0;
  std::span<const double> x{};
  std::span<const double> u{};
  double y = 0.0;
  double m = 0.0;
};

/// A parsed arithmetic expression over the variables {t, x1..xd, u1..uk, y, m},
/// the operators {+, -, *, /, ^} and the function set {abs, min, max, exp,
/// log, sqrt, tanh, indicator_leq0, normal_cdf}.
///
/// Expressions are immutable value types; evaluation is pure and thread-safe.
/// The printer emits a canonical form: parse(print(e)) reproduces e node for
/// node, and print(parse(s)) is a fixed point of print∘parse.
class Expression {
 public:
  enum class Op : std::uint8_t {
    Const, VarT, VarY, VarM, VarX, VarU,
    Add, Sub, Mul, Div, Pow, Neg,
    Abs, Min, Max, Exp, Log, Sqrt, Tanh, IndicatorLeq0, NormalCdf,
  };

  struct Node {
    Op op;
    std::int32_t index = 0;  // 1-based coordinate for VarX / VarU
    double value = 0.0;      // payload for Const
  };

  Expression() = default;

  /// Parses `text`; throws ParseError with a character offset on bad input.
  /// Unknown identifiers (anything outside the variable/function sets) are
  /// rejected here, not at evaluation time.
  static Expression parse(std::string_view text);

  /// Convenience: an expression that is identically `c`.
  static Expression constant(double c);

  /// Evaluates under `ctx`; throws EvalError for unbound variables and for
  /// domain errors. Finite bindings otherwise yield a finite result.
  double eval(const EvalContext& ctx) const;

  /// Canonical text form (round-trips through parse).
  std::string str() const;

  bool operator==(const Expression& rhs) const;

  /// Largest i such that xi (resp. ui) occurs; 0 when absent.
  int max_x_index() const;
  int max_u_index() const;
  bool uses_t() const;
  bool uses_y() const;
  bool uses_m() const;

  /// True when the expression is a literal constant equal to `c`.
  bool is_constant(double c) const;

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  // Postfix program; eval runs it on a small value stack.
  std::vector<Node> nodes_;
};

/// Standard normal CDF (also exposed as the DSL primitive normal_cdf).
double normal_cdf(double z);

}  // namespace cstoc
