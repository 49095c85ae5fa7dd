#include "cstoc/specfile.hpp"

#include <charconv>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace cstoc {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Entry {
  std::string value;
  int line;
  bool used = false;
};

using Section = std::map<std::string, Entry>;

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  throw SpecFileError(source + ":" + std::to_string(line) + ": " + msg, line);
}

class SpecReader {
 public:
  SpecReader(const std::string& text, std::string source) : source_(std::move(source)) {
    parse_lines(text);
  }

  ProblemSpec build() {
    ProblemSpec spec;
    spec.name = take_string("dynamics", "name", source_stem());

    spec.dim = static_cast<int>(take_number("dynamics", "dim", 1));
    spec.horizon = take_number("dynamics", "horizon", 1.0);
    spec.log_step = take_bool("dynamics", "log_step", false);
    spec.drift = take_expr_vector("dynamics", "drift", spec.dim);
    spec.diffusion = take_expr_matrix("dynamics", "diffusion", spec.dim);

    spec.reward = take_expr("objective", "reward");
    spec.discount = take_number("objective", "discount", 0.0);

    if (has("constraint", "constraint"))
      spec.constraint = take_expr("constraint", "constraint");
    else
      spec.constraint = Expression::constant(0.0);

    spec.controls = take_controls();
    if (has_section("domain")) spec.domain = take_domain(spec.dim);
    spec.feedback_hat = take_optional_expr_vector("domain", "feedback_hat", spec.controls.dim());
    spec.feedback_check =
        take_optional_expr_vector("domain", "feedback_check", spec.controls.dim());

    spec.assumptions.f_lsc = take_bool("assumptions", "f_lsc", true);
    spec.assumptions.g_usc = take_bool("assumptions", "g_usc", true);
    spec.assumptions.f_bounded = take_bool("assumptions", "f_bounded", false);
    spec.assumptions.coeff_linear_growth =
        take_bool("assumptions", "coeff_linear_growth", true);

    check_all_used();
    try {
      spec.check_well_formed();
    } catch (const SpecError& e) {
      fail(source_, 0, e.what());
    }
    return spec;
  }

 private:
  void parse_lines(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      // Strip comments; '#' inside a quoted value does not start a comment.
      bool quoted = false;
      std::string stripped;
      for (char c : raw) {
        if (c == '"') quoted = !quoted;
        if (c == '#' && !quoted) break;
        stripped.push_back(c);
      }
      const std::string s = trim(stripped);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') fail(source_, line, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section != "dynamics" && section != "objective" && section != "constraint" &&
            section != "controls" && section != "domain" && section != "assumptions")
          fail(source_, line, "unknown section [" + section + "]");
        sections_[section];  // materialize even when empty
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(source_, line, "expected key = value");
      if (section.empty()) fail(source_, line, "entry before any [section]");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) fail(source_, line, "empty key");
      if (value.empty()) fail(source_, line, "empty value for '" + key + "'");
      auto [it, inserted] = sections_[section].emplace(key, Entry{value, line});
      if (!inserted) fail(source_, line, "duplicate key '" + key + "'");
    }
  }

  bool has_section(const std::string& sec) const { return sections_.count(sec) != 0; }

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections_.find(sec);
    return s != sections_.end() && s->second.count(key) != 0;
  }

  Entry* find(const std::string& sec, const std::string& key) {
    auto s = sections_.find(sec);
    if (s == sections_.end()) return nullptr;
    auto e = s->second.find(key);
    if (e == s->second.end()) return nullptr;
    e->second.used = true;
    return &e->second;
  }

  std::string unquote(const Entry& e) const {
    const std::string& v = e.value;
    if (v.size() < 2 || v.front() != '"' || v.back() != '"')
      fail(source_, e.line, "expected a quoted string");
    return v.substr(1, v.size() - 2);
  }

  double parse_num(const Entry& e, const std::string& text) const {
    const std::string t = trim(text);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || ptr != t.data() + t.size())
      fail(source_, e.line, "malformed number '" + t + "'");
    return out;
  }

  double take_number(const std::string& sec, const std::string& key, double dflt) {
    Entry* e = find(sec, key);
    return e ? parse_num(*e, e->value) : dflt;
  }

  bool take_bool(const std::string& sec, const std::string& key, bool dflt) {
    Entry* e = find(sec, key);
    if (!e) return dflt;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    fail(source_, e->line, "expected true or false for '" + key + "'");
  }

  std::string take_string(const std::string& sec, const std::string& key,
                          const std::string& dflt) {
    Entry* e = find(sec, key);
    return e ? unquote(*e) : dflt;
  }

  /// Enum-like values may be written bare (kind = halfspace) or quoted.
  std::string take_word(const std::string& sec, const std::string& key,
                        const std::string& dflt) {
    Entry* e = find(sec, key);
    if (!e) return dflt;
    const std::string& v = e->value;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
      return v.substr(1, v.size() - 2);
    return v;
  }

  Expression parse_expr_entry(const Entry& e, const std::string& key) const {
    const std::string body = unquote(e);
    try {
      return Expression::parse(body);
    } catch (const ParseError& pe) {
      fail(source_, e.line, "in '" + key + "': " + pe.what() + " at offset " +
                                std::to_string(pe.offset));
    }
  }

  Expression take_expr(const std::string& sec, const std::string& key) {
    Entry* e = find(sec, key);
    if (!e) fail(source_, 0, "missing required key '" + key + "' in [" + sec + "]");
    return parse_expr_entry(*e, key);
  }

  /// Vector-valued entries: `drift = "..."` for d=1, else `drift1`, `drift2`, ...
  std::vector<Expression> take_expr_vector(const std::string& sec, const std::string& key,
                                           int d) {
    std::vector<Expression> out;
    if (d == 1 && has(sec, key)) {
      out.push_back(take_expr(sec, key));
      return out;
    }
    for (int i = 1; i <= d; ++i) {
      const std::string k = d == 1 ? key : key + std::to_string(i);
      out.push_back(take_expr(sec, k));
    }
    return out;
  }

  std::vector<Expression> take_optional_expr_vector(const std::string& sec,
                                                    const std::string& key, int k) {
    std::vector<Expression> out;
    if (k == 1) {
      if (has(sec, key)) out.push_back(take_expr(sec, key));
      return out;
    }
    if (!has(sec, key + "1")) return out;
    for (int i = 1; i <= k; ++i) out.push_back(take_expr(sec, key + std::to_string(i)));
    return out;
  }

  /// Matrix-valued entries: `diffusion = "..."` for d=1, else `diffusion11`, ...
  std::vector<std::vector<Expression>> take_expr_matrix(const std::string& sec,
                                                        const std::string& key, int d) {
    std::vector<std::vector<Expression>> out(d);
    if (d == 1) {
      out[0].push_back(take_expr(sec, key));
      return out;
    }
    for (int i = 1; i <= d; ++i)
      for (int j = 1; j <= d; ++j) {
        const std::string k = key + std::to_string(i) + std::to_string(j);
        if (has(sec, k)) {
          out[i - 1].push_back(take_expr(sec, k));
        } else if (i == j && has(sec, key + std::to_string(i))) {
          out[i - 1].push_back(take_expr(sec, key + std::to_string(i)));
        } else {
          out[i - 1].push_back(Expression::constant(0.0));
        }
      }
    return out;
  }

  std::vector<double> take_number_list(const std::string& sec, const std::string& key,
                                       std::vector<double> dflt) {
    Entry* e = find(sec, key);
    if (!e) return dflt;
    std::vector<double> out;
    std::string item;
    std::istringstream in(e->value);
    while (std::getline(in, item, ',')) out.push_back(parse_num(*e, item));
    if (out.empty()) fail(source_, e->line, "empty list for '" + key + "'");
    return out;
  }

  ControlSet take_controls() {
    ControlSet u;
    if (!has_section("controls")) fail(source_, 0, "missing [controls] section");
    u.lo = take_number_list("controls", "lo", {});
    u.hi = take_number_list("controls", "hi", {});
    if (u.lo.empty() || u.hi.empty()) fail(source_, 0, "[controls] needs lo and hi");
    u.points_per_axis = static_cast<int>(take_number("controls", "points_per_axis", 11));
    if (Entry* e = find("controls", "list")) {
      std::istringstream in(e->value);
      std::string tuple;
      while (std::getline(in, tuple, ';')) {
        std::vector<double> p;
        std::istringstream tin(tuple);
        std::string item;
        while (std::getline(tin, item, ',')) p.push_back(parse_num(*e, item));
        u.points.push_back(std::move(p));
      }
    }
    try {
      u.validate();
    } catch (const SpecError& err) {
      fail(source_, 0, err.what());
    }
    return u;
  }

  DomainSpec take_domain(int d) {
    DomainSpec dom;
    dom.delta = take_expr("domain", "delta");
    const std::string kind = take_word("domain", "kind", "generic");
    if (kind == "halfspace") {
      dom.kind = DomainKind::HalfSpace;
      dom.normal = take_number_list("domain", "normal", std::vector<double>(d, 0.0));
      dom.offset = take_number("domain", "offset", 0.0);
    } else if (kind == "box") {
      dom.kind = DomainKind::Box;
      dom.box_lo = take_number_list("domain", "box_lo", {});
      dom.box_hi = take_number_list("domain", "box_hi", {});
      if (dom.box_lo.size() != static_cast<std::size_t>(d) ||
          dom.box_hi.size() != static_cast<std::size_t>(d))
        fail(source_, 0, "[domain] box_lo/box_hi must have d entries");
    } else if (kind == "ball") {
      dom.kind = DomainKind::Ball;
      dom.center = take_number_list("domain", "center", std::vector<double>(d, 0.0));
      dom.radius = take_number("domain", "radius", 1.0);
    } else if (kind == "generic") {
      dom.kind = DomainKind::Generic;
    } else {
      fail(source_, 0, "unknown domain kind '" + kind + "'");
    }
    return dom;
  }

  void check_all_used() const {
    for (const auto& [sec, entries] : sections_)
      for (const auto& [key, e] : entries)
        if (!e.used) fail(source_, e.line, "unknown key '" + key + "' in [" + sec + "]");
  }

  std::string source_stem() const {
    return std::filesystem::path(source_).stem().string();
  }

  std::string source_;
  std::map<std::string, Section> sections_;
};

}  // namespace

ProblemSpec parse_problem_text(const std::string& text, const std::string& source) {
  return SpecReader(text, source).build();
}

ProblemSpec load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open problem file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem_text(buf.str(), path);
}

}  // namespace cstoc
