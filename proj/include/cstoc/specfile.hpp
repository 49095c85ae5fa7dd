#pragma once

#include <string>

#include "cstoc/problem.hpp"

namespace cstoc {

/// Thrown on malformed problem files; the message includes "<source>:<line>:".
struct SpecFileError : std::runtime_error {
  SpecFileError(const std::string& what, int line_) : std::runtime_error(what), line(line_) {}
  int line;
};

/// Parses the line-oriented problem format (sections [dynamics], [objective],
/// [constraint], [controls], [domain], [assumptions]; `key = value` entries;
/// expressions in double quotes). The full grammar is documented in the
/// README. `source` names the input in error messages.
ProblemSpec parse_problem_text(const std::string& text, const std::string& source);

/// Reads and parses a problem file; the problem name defaults to the file
/// stem unless the file sets one.
ProblemSpec load_problem_file(const std::string& path);

}  // namespace cstoc
