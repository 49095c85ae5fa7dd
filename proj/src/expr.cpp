#include "cstoc/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace cstoc {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

namespace {

struct FuncInfo {
  const char* name;
  Expression::Op op;
  int arity;
};

constexpr std::array<FuncInfo, 9> kFuncs{{
    {"abs", Expression::Op::Abs, 1},
    {"min", Expression::Op::Min, 2},
    {"max", Expression::Op::Max, 2},
    {"exp", Expression::Op::Exp, 1},
    {"log", Expression::Op::Log, 1},
    {"sqrt", Expression::Op::Sqrt, 1},
    {"tanh", Expression::Op::Tanh, 1},
    {"indicator_leq0", Expression::Op::IndicatorLeq0, 1},
    {"normal_cdf", Expression::Op::NormalCdf, 1},
}};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  std::vector<Expression::Node> run() {
    std::vector<Expression::Node> out;
    parse_sum(out);
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected trailing input", pos_);
    return out;
  }

 private:
  using Node = Expression::Node;
  using Op = Expression::Op;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void parse_sum(std::vector<Node>& out) {
    parse_product(out);
    for (;;) {
      if (eat('+')) {
        parse_product(out);
        out.push_back({Op::Add});
      } else if (eat('-')) {
        parse_product(out);
        out.push_back({Op::Sub});
      } else {
        return;
      }
    }
  }

  void parse_product(std::vector<Node>& out) {
    parse_unary(out);
    for (;;) {
      if (eat('*')) {
        parse_unary(out);
        out.push_back({Op::Mul});
      } else if (eat('/')) {
        parse_unary(out);
        out.push_back({Op::Div});
      } else {
        return;
      }
    }
  }

  void parse_unary(std::vector<Node>& out) {
    if (eat('-')) {
      parse_unary(out);
      out.push_back({Op::Neg});
      return;
    }
    parse_power(out);
  }

  void parse_power(std::vector<Node>& out) {
    parse_atom(out);
    if (eat('^')) {
      parse_unary(out);  // right-associative; allows 2^-1
      out.push_back({Op::Pow});
    }
  }

  void parse_atom(std::vector<Node>& out) {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("expected operand", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum(out);
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number(out);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      parse_identifier(out);
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  void parse_number(std::vector<Node>& out) {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{}) throw ParseError("malformed number", pos_);
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    out.push_back({Op::Const, 0, value});
  }

  void parse_identifier(std::vector<Node>& out) {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    for (const auto& f : kFuncs) {
      if (name == f.name) {
        if (!eat('(')) throw ParseError("expected '(' after function name", pos_);
        parse_sum(out);
        for (int i = 1; i < f.arity; ++i) {
          if (!eat(',')) throw ParseError("expected ','", pos_);
          parse_sum(out);
        }
        if (!eat(')')) throw ParseError("expected ')'", pos_);
        out.push_back({f.op});
        return;
      }
    }

    if (name == "t") { out.push_back({Op::VarT}); return; }
    if (name == "y") { out.push_back({Op::VarY}); return; }
    if (name == "m") { out.push_back({Op::VarM}); return; }
    if ((name[0] == 'x' || name[0] == 'u') && name.size() > 1) {
      int index = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (ec == std::errc{} && ptr == name.data() + name.size() && index >= 1) {
        out.push_back({name[0] == 'x' ? Op::VarX : Op::VarU, index});
        return;
      }
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace

Expression Expression::parse(std::string_view text) {
  if (text.empty()) throw ParseError("empty expression", 0);
  Expression e;
  e.nodes_ = Parser(text).run();
  return e;
}

Expression Expression::constant(double c) {
  Expression e;
  e.nodes_.push_back({Op::Const, 0, c});
  return e;
}

double Expression::eval(const EvalContext& ctx) const {
  // Fixed-capacity stack: postfix depth is bounded by the node count, and
  // practical coefficient expressions stay tiny.
  std::array<double, 64> stack;
  std::size_t sp = 0;
  if (nodes_.size() > stack.size())
    throw EvalError("expression too deep");
  auto pop = [&]() { return stack[--sp]; };
  auto push = [&](double v) { stack[sp++] = v; };

  for (const Node& n : nodes_) {
    switch (n.op) {
      case Op::Const: push(n.value); break;
      case Op::VarT: push(ctx.t); break;
      case Op::VarY: push(ctx.y); break;
      case Op::VarM: push(ctx.m); break;
      case Op::VarX:
        if (static_cast<std::size_t>(n.index) > ctx.x.size())
          throw EvalError("unbound variable x" + std::to_string(n.index));
        push(ctx.x[n.index - 1]);
        break;
      case Op::VarU:
        if (static_cast<std::size_t>(n.index) > ctx.u.size())
          throw EvalError("unbound variable u" + std::to_string(n.index));
        push(ctx.u[n.index - 1]);
        break;
      case Op::Add: { const double b = pop(), a = pop(); push(a + b); break; }
      case Op::Sub: { const double b = pop(), a = pop(); push(a - b); break; }
      case Op::Mul: { const double b = pop(), a = pop(); push(a * b); break; }
      case Op::Div: {
        const double b = pop(), a = pop();
        if (b == 0.0) throw EvalError("division by zero");
        push(a / b);
        break;
      }
      case Op::Pow: {
        const double b = pop(), a = pop();
        if (a == 0.0 && b < 0.0) throw EvalError("zero raised to a negative power");
        if (a < 0.0 && b != std::nearbyint(b))
          throw EvalError("negative base with non-integer exponent");
        push(std::pow(a, b));
        break;
      }
      case Op::Neg: push(-pop()); break;
      case Op::Abs: push(std::fabs(pop())); break;
      case Op::Min: { const double b = pop(), a = pop(); push(std::fmin(a, b)); break; }
      case Op::Max: { const double b = pop(), a = pop(); push(std::fmax(a, b)); break; }
      case Op::Exp: push(std::exp(pop())); break;
      case Op::Log: {
        const double a = pop();
        if (a <= 0.0) throw EvalError("log of a nonpositive value");
        push(std::log(a));
        break;
      }
      case Op::Sqrt: {
        const double a = pop();
        if (a < 0.0) throw EvalError("sqrt of a negative value");
        push(std::sqrt(a));
        break;
      }
      case Op::Tanh: push(std::tanh(pop())); break;
      case Op::IndicatorLeq0: push(pop() <= 0.0 ? 1.0 : 0.0); break;
      case Op::NormalCdf: push(normal_cdf(pop())); break;
    }
  }
  if (sp != 1) throw EvalError("malformed expression program");
  return stack[0];
}

namespace {

// Printing precedence levels; higher binds tighter.
constexpr int kPrecSum = 1, kPrecProd = 2, kPrecUnary = 3, kPrecPow = 4, kPrecAtom = 5;

const char* func_name(Expression::Op op) {
  for (const auto& f : kFuncs)
    if (f.op == op) return f.name;
  return nullptr;
}

}  // namespace

std::string Expression::str() const {
  // Rebuild infix text from the postfix program with minimal parentheses.
  struct Frag {
    std::string text;
    int prec;
  };
  std::vector<Frag> stack;
  auto wrap = [](const Frag& f, int need) {
    return f.prec < need ? "(" + f.text + ")" : f.text;
  };

  for (const Node& n : nodes_) {
    switch (n.op) {
      case Op::Const:
        stack.push_back({format_double(n.value), n.value < 0 ? kPrecUnary : kPrecAtom});
        break;
      case Op::VarT: stack.push_back({"t", kPrecAtom}); break;
      case Op::VarY: stack.push_back({"y", kPrecAtom}); break;
      case Op::VarM: stack.push_back({"m", kPrecAtom}); break;
      case Op::VarX: stack.push_back({"x" + std::to_string(n.index), kPrecAtom}); break;
      case Op::VarU: stack.push_back({"u" + std::to_string(n.index), kPrecAtom}); break;
      case Op::Add: case Op::Sub: {
        Frag b = stack.back(); stack.pop_back();
        Frag a = stack.back(); stack.pop_back();
        const char* sym = n.op == Op::Add ? " + " : " - ";
        // Subtraction needs the right operand to bind strictly tighter.
        stack.push_back({wrap(a, kPrecSum) + sym + wrap(b, n.op == Op::Sub ? kPrecProd : kPrecSum),
                         kPrecSum});
        break;
      }
      case Op::Mul: case Op::Div: {
        Frag b = stack.back(); stack.pop_back();
        Frag a = stack.back(); stack.pop_back();
        const char* sym = n.op == Op::Mul ? "*" : "/";
        stack.push_back({wrap(a, kPrecProd) + sym + wrap(b, n.op == Op::Div ? kPrecUnary : kPrecProd),
                         kPrecProd});
        break;
      }
      case Op::Pow: {
        Frag b = stack.back(); stack.pop_back();
        Frag a = stack.back(); stack.pop_back();
        stack.push_back({wrap(a, kPrecAtom) + "^" + wrap(b, kPrecUnary), kPrecPow});
        break;
      }
      case Op::Neg: {
        Frag a = stack.back(); stack.pop_back();
        stack.push_back({"-" + wrap(a, kPrecUnary), kPrecUnary});
        break;
      }
      default: {
        const char* name = func_name(n.op);
        if (n.op == Op::Min || n.op == Op::Max) {
          Frag b = stack.back(); stack.pop_back();
          Frag a = stack.back(); stack.pop_back();
          stack.push_back({std::string(name) + "(" + a.text + ", " + b.text + ")", kPrecAtom});
        } else {
          Frag a = stack.back(); stack.pop_back();
          stack.push_back({std::string(name) + "(" + a.text + ")", kPrecAtom});
        }
        break;
      }
    }
  }
  return stack.empty() ? std::string() : stack.back().text;
}

bool Expression::operator==(const Expression& rhs) const {
  if (nodes_.size() != rhs.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = rhs.nodes_[i];
    if (a.op != b.op || a.index != b.index) return false;
    if (a.op == Op::Const && !(a.value == b.value)) return false;
  }
  return true;
}

int Expression::max_x_index() const {
  int best = 0;
  for (const Node& n : nodes_)
    if (n.op == Op::VarX) best = std::max(best, static_cast<int>(n.index));
  return best;
}

int Expression::max_u_index() const {
  int best = 0;
  for (const Node& n : nodes_)
    if (n.op == Op::VarU) best = std::max(best, static_cast<int>(n.index));
  return best;
}

bool Expression::uses_t() const {
  for (const Node& n : nodes_)
    if (n.op == Op::VarT) return true;
  return false;
}

bool Expression::uses_y() const {
  for (const Node& n : nodes_)
    if (n.op == Op::VarY) return true;
  return false;
}

bool Expression::uses_m() const {
  for (const Node& n : nodes_)
    if (n.op == Op::VarM) return true;
  return false;
}

bool Expression::is_constant(double c) const {
  return nodes_.size() == 1 && nodes_[0].op == Op::Const && nodes_[0].value == c;
}

}  // namespace cstoc
