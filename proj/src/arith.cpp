#include "pide/arith.hpp"

namespace pide::arith {
namespace {

bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r'; }
bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }
bool is_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || c == U'_'; }

struct Failure {
  ParseError error;
};

class Parser {
 public:
  explicit Parser(TextView text) : text_(text) {}

  Expr expr_only() {
    Expr e = sum();
    skip();
    if (pos_ != text_.size()) fail("unexpected input");
    return e;
  }

  Claim claim() {
    Claim c;
    c.lhs = sum();
    skip();
    auto rel = relation();
    if (!rel) fail(pos_ == text_.size() ? "missing comparison" : "expected comparison operator");
    c.relation = *rel;
    c.rhs = sum();
    skip();
    if (pos_ != text_.size()) fail("unexpected input after claim");
    return c;
  }

 private:
  TextView text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(std::string message) { throw Failure{{std::move(message), pos_}}; }

  void skip() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  bool eat(std::u32string_view s) {
    skip();
    if (text_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
      return true;
    }
    return false;
  }

  std::optional<Relation> relation() {
    static const std::pair<std::u32string_view, Relation> table[] = {
        {U"\\<noteq>", Relation::ne}, {U"\\<le>", Relation::le}, {U"\\<ge>", Relation::ge},
        {U"!=", Relation::ne},        {U"<=", Relation::le},     {U">=", Relation::ge},
        {U"≠", Relation::ne},         {U"≤", Relation::le},      {U"≥", Relation::ge},
        {U"=", Relation::eq},         {U"<", Relation::lt},      {U">", Relation::gt},
    };
    for (const auto& [sym, rel] : table) {
      if (eat(sym)) return rel;
    }
    return std::nullopt;
  }

  Expr binary(Expr::Kind kind, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = kind;
    e.range = {lhs.range.begin, rhs.range.end};
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }

  Expr sum() {
    Expr lhs = product();
    while (true) {
      if (eat(U"+")) {
        lhs = binary(Expr::Kind::add, std::move(lhs), product());
      } else if (eat(U"-")) {
        lhs = binary(Expr::Kind::subtract, std::move(lhs), product());
      } else {
        return lhs;
      }
    }
  }

  Expr product() {
    Expr lhs = unary();
    while (true) {
      if (eat(U"*")) {
        lhs = binary(Expr::Kind::multiply, std::move(lhs), unary());
      } else if (eat(U"/")) {
        lhs = binary(Expr::Kind::divide, std::move(lhs), unary());
      } else if (peek_word(U"mod")) {
        pos_ += 3;
        lhs = binary(Expr::Kind::modulo, std::move(lhs), unary());
      } else {
        return lhs;
      }
    }
  }

  bool peek_word(std::u32string_view w) {
    skip();
    if (text_.substr(pos_, w.size()) != w) return false;
    const std::size_t end = pos_ + w.size();
    return end >= text_.size() || !(is_letter(text_[end]) || is_digit(text_[end]));
  }

  Expr unary() {
    skip();
    const std::size_t start = pos_;
    if (eat(U"-")) {
      Expr inner = unary();
      Expr e;
      e.kind = Expr::Kind::negate;
      e.range = {start, inner.range.end};
      e.args.push_back(std::move(inner));
      return e;
    }
    return atom();
  }

  Expr atom() {
    skip();
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) fail("expected expression");
    if (eat(U"(")) {
      Expr inner = sum();
      if (!eat(U")")) fail("expected \")\"");
      inner.range = {start, pos_};
      return inner;
    }
    Expr e;
    if (is_digit(text_[pos_])) {
      std::int64_t v = 0;
      while (pos_ < text_.size() && is_digit(text_[pos_])) {
        if (__builtin_mul_overflow(v, 10, &v) ||
            __builtin_add_overflow(v, static_cast<std::int64_t>(text_[pos_] - U'0'), &v)) {
          fail("numeral too large");
        }
        ++pos_;
      }
      e.kind = Expr::Kind::number;
      e.value = v;
    } else if (is_letter(text_[pos_])) {
      while (pos_ < text_.size() && (is_letter(text_[pos_]) || is_digit(text_[pos_]) ||
                                     text_[pos_] == U'\'')) {
        ++pos_;
      }
      e.kind = Expr::Kind::name;
      e.name = utf8::encode(text_.substr(start, pos_ - start));
    } else {
      fail("unexpected character");
    }
    e.range = {start, pos_};
    return e;
  }
};

}  // namespace

std::string_view to_string(Relation rel) {
  switch (rel) {
    case Relation::eq: return "=";
    case Relation::ne: return "!=";
    case Relation::lt: return "<";
    case Relation::le: return "<=";
    case Relation::gt: return ">";
    case Relation::ge: return ">=";
  }
  return "?";
}

std::variant<Claim, ParseError> parse_claim(TextView text) {
  try {
    return Parser(text).claim();
  } catch (const Failure& f) {
    return f.error;
  }
}

std::variant<Expr, ParseError> parse_expr(TextView text) {
  try {
    return Parser(text).expr_only();
  } catch (const Failure& f) {
    return f.error;
  }
}

std::variant<std::int64_t, EvalError> evaluate(const Expr& expr, const Lookup& lookup) {
  using K = Expr::Kind;
  switch (expr.kind) {
    case K::number: return expr.value;
    case K::name: {
      if (lookup) {
        if (auto v = lookup(expr.name)) return *v;
      }
      return EvalError{"undefined name \"" + expr.name + "\"", expr.range};
    }
    case K::negate: {
      auto v = evaluate(expr.args[0], lookup);
      if (auto* err = std::get_if<EvalError>(&v)) return *err;
      std::int64_t out = 0;
      if (__builtin_sub_overflow(std::int64_t{0}, std::get<std::int64_t>(v), &out)) {
        return EvalError{"arithmetic overflow", expr.range};
      }
      return out;
    }
    default: break;
  }
  auto a = evaluate(expr.args[0], lookup);
  if (auto* err = std::get_if<EvalError>(&a)) return *err;
  auto b = evaluate(expr.args[1], lookup);
  if (auto* err = std::get_if<EvalError>(&b)) return *err;
  const std::int64_t x = std::get<std::int64_t>(a);
  const std::int64_t y = std::get<std::int64_t>(b);
  std::int64_t out = 0;
  bool overflow = false;
  switch (expr.kind) {
    case K::add: overflow = __builtin_add_overflow(x, y, &out); break;
    case K::subtract: overflow = __builtin_sub_overflow(x, y, &out); break;
    case K::multiply: overflow = __builtin_mul_overflow(x, y, &out); break;
    case K::divide:
    case K::modulo:
      if (y == 0) return EvalError{"division by zero", expr.range};
      if (x == INT64_MIN && y == -1) {
        overflow = true;
        break;
      }
      out = expr.kind == K::divide ? x / y : x % y;
      break;
    default: break;
  }
  if (overflow) return EvalError{"arithmetic overflow", expr.range};
  return out;
}

bool holds(Relation rel, std::int64_t lhs, std::int64_t rhs) {
  switch (rel) {
    case Relation::eq: return lhs == rhs;
    case Relation::ne: return lhs != rhs;
    case Relation::lt: return lhs < rhs;
    case Relation::le: return lhs <= rhs;
    case Relation::gt: return lhs > rhs;
    case Relation::ge: return lhs >= rhs;
  }
  return false;
}

}  // namespace pide::arith
