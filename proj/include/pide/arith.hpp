#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pide/text.hpp"

namespace pide::arith {

/// Integer expressions: numerals, names, unary minus, + - * / mod, parentheses.
struct Expr {
  enum class Kind { number, name, negate, add, subtract, multiply, divide, modulo };
  Kind kind = Kind::number;
  std::int64_t value = 0;
  std::string name;
  std::vector<Expr> args;
  Range range;  // in the parsed text
};

enum class Relation { eq, ne, lt, le, gt, ge };

std::string_view to_string(Relation rel);

struct Claim {
  Expr lhs;
  Relation relation = Relation::eq;
  Expr rhs;
};

struct ParseError {
  std::string message;
  Offset offset = 0;
};

/// Parses `lhs REL rhs` where REL is one of = ≠ != < ≤ <= > ≥ >= (also
/// \<noteq>, \<le>, \<ge>).
std::variant<Claim, ParseError> parse_claim(TextView text);
std::variant<Expr, ParseError> parse_expr(TextView text);

using Lookup = std::function<std::optional<std::int64_t>(const std::string&)>;

struct EvalError {
  std::string message;
  Range range;
};

std::variant<std::int64_t, EvalError> evaluate(const Expr& expr, const Lookup& lookup = {});

/// Holds iff the relation holds between both evaluated sides.
bool holds(Relation rel, std::int64_t lhs, std::int64_t rhs);

}  // namespace pide::arith
