#include "pide/theory_checker.hpp"

#include <algorithm>

#include "pide/arith.hpp"

namespace pide {
namespace {

struct Argument {
  Text payload;
  /// Offset of payload[0] within the span when the payload is a verbatim
  /// slice of the source.
  std::optional<Offset> payload_start;
};

std::optional<Argument> argument(const Token& token, Offset span_begin) {
  const Offset start = token.range.begin - span_begin;
  switch (token.kind) {
    case TokenKind::quoted_string: {
      auto payload = unquote_string(token.source);
      if (!payload) return std::nullopt;
      Argument arg{*payload, std::nullopt};
      if (payload->size() + 2 == token.range.length()) arg.payload_start = start + 1;
      return arg;
    }
    case TokenKind::cartouche: {
      const TextView literal = token.source;
      const TextView body = cartouche_body(literal);
      return Argument{Text(body), start + static_cast<Offset>(body.data() - literal.data())};
    }
    case TokenKind::number:
    case TokenKind::identifier:
      return Argument{Text(token.source), start};
    default:
      return std::nullopt;
  }
}

Text trim(TextView s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == U' ' || s[b] == U'\n' || s[b] == U'\t' || s[b] == U'\r')) ++b;
  while (e > b && (s[e - 1] == U' ' || s[e - 1] == U'\n' || s[e - 1] == U'\t' || s[e - 1] == U'\r')) --e;
  return Text(s.substr(b, e - b));
}

Range relative(const Token& t, Offset span_begin) {
  return {t.range.begin - span_begin, t.range.end - span_begin};
}

arith::Lookup lookup_in(const TheoryContext& ctx) {
  return [&ctx](const std::string& name) -> std::optional<std::int64_t> {
    auto it = ctx.constants.find(name);
    if (it == ctx.constants.end()) return std::nullopt;
    return it->second;
  };
}

CheckOutcome check_prelude(const SpanInput& in, const MessageSink& emit, SpanOutput& out) {
  const Range whole{0, in.span.range.length()};
  if (in.node.header_error) {
    const auto& err = *in.node.header_error;
    Range r = err.range;
    r.begin = std::min(r.begin, whole.end);
    r.end = std::clamp(r.end, r.begin, whole.end);
    emit(make_message(Severity::error, r, err.message, Phase::syntax));
  }
  for (const auto& missing : in.missing_imports) {
    emit(make_message(Severity::error, whole, "unknown theory " + missing.stem()));
  }
  if (in.node.header) {
    emit(make_message(Severity::status, whole, "theory " + in.node.header->name, Phase::syntax));
  }
  out.context = in.context;
  return CheckOutcome::finished;
}

}  // namespace

std::shared_ptr<const TheoryContext> merge_theory_contexts(
    const std::vector<std::shared_ptr<const TheoryContext>>& imports) {
  auto merged = std::make_shared<TheoryContext>();
  for (const auto& ctx : imports) {
    if (!ctx) continue;
    for (const auto& [name, value] : ctx->constants) merged->constants.emplace(name, value);
  }
  return merged;
}

CheckOutcome check_theory_span(const SpanInput& in, std::stop_token cancel, const MessageSink& emit,
                               SpanOutput& out) {
  if (!in.context) out.context = std::make_shared<TheoryContext>();
  const auto context = in.context ? in.context : out.context;
  out.context = context;
  if (in.span.is_prelude()) return check_prelude(in, emit, out);

  const Offset base = in.span.range.begin;
  const Range whole{0, in.span.range.length()};
  const auto tokens = tokenize(in.span.source, in.node.keywords);
  std::vector<Token> proper;
  bool syntax_error = false;
  for (auto t : tokens) {
    t.range = t.range.shifted(base);
    if (t.kind == TokenKind::error) {
      emit(make_message(Severity::error, relative(t, base), "syntax error: malformed token",
                        Phase::syntax));
      syntax_error = true;
    }
    if (t.is_proper()) proper.push_back(t);
  }
  if (syntax_error || proper.empty()) return CheckOutcome::finished;
  const Token& keyword = proper.front();
  const Range keyword_range = relative(keyword, base);
  const std::string& cmd = in.span.command;
  emit(make_message(Severity::status, keyword_range, cmd, Phase::syntax));

  auto malformed = [&](const std::string& expected) {
    emit(make_message(Severity::error, whole, "malformed " + cmd + ": expected " + expected,
                      Phase::syntax));
    return CheckOutcome::finished;
  };

  if (cmd == "definition") {
    if (proper.size() != 4 || proper[1].kind != TokenKind::identifier || proper[2].source != U"=") {
      return malformed("NAME = TERM");
    }
    auto arg = argument(proper[3], base);
    if (!arg) return malformed("NAME = TERM");
    const std::string name = proper[1].text();
    const Range name_range = relative(proper[1], base);
    if (context->constants.contains(name)) {
      emit(make_message(Severity::error, name_range, "duplicate definition of " + name));
      return CheckOutcome::finished;
    }
    auto expr = arith::parse_expr(arg->payload);
    if (auto* err = std::get_if<arith::ParseError>(&expr)) {
      emit(make_message(Severity::error, relative(proper[3], base), "parse error: " + err->message,
                        Phase::syntax));
      return CheckOutcome::finished;
    }
    auto value = arith::evaluate(std::get<arith::Expr>(expr), lookup_in(*context));
    if (auto* err = std::get_if<arith::EvalError>(&value)) {
      emit(make_message(Severity::error, relative(proper[3], base), err->message));
      return CheckOutcome::finished;
    }
    auto next = std::make_shared<TheoryContext>(*context);
    next->constants[name] = std::get<std::int64_t>(value);
    out.context = next;
    emit(make_message(Severity::writeln, name_range,
                      name + " = " + std::to_string(std::get<std::int64_t>(value))));
    return CheckOutcome::finished;
  }

  if (cmd == "lemma") {
    if (proper.size() != 2) return malformed("a single claim");
    auto arg = argument(proper[1], base);
    if (!arg) return malformed("a single claim");
    const Range arg_range = relative(proper[1], base);
    auto parsed = arith::parse_claim(arg->payload);
    if (auto* err = std::get_if<arith::ParseError>(&parsed)) {
      emit(make_message(Severity::error, arg_range, "parse error: " + err->message, Phase::syntax));
      return CheckOutcome::finished;
    }
    const auto& claim = std::get<arith::Claim>(parsed);
    auto lhs = arith::evaluate(claim.lhs, lookup_in(*context));
    auto rhs = arith::evaluate(claim.rhs, lookup_in(*context));
    for (const auto* side : {&lhs, &rhs}) {
      if (const auto* err = std::get_if<arith::EvalError>(side)) {
        emit(make_message(Severity::error, arg_range, err->message));
        return CheckOutcome::finished;
      }
    }
    const auto l = std::get<std::int64_t>(lhs);
    const auto r = std::get<std::int64_t>(rhs);
    if (arith::holds(claim.relation, l, r)) {
      emit(make_message(Severity::writeln, arg_range, "proved"));
      return CheckOutcome::finished;
    }
    CheckerMessage msg = make_message(
        Severity::error, arg_range,
        "false proposition: " + std::to_string(l) + " " + std::string(arith::to_string(claim.relation)) +
            " " + std::to_string(r) + " does not hold");
    if (arg->payload_start && claim.relation == arith::Relation::eq &&
        claim.rhs.kind == arith::Expr::Kind::number) {
      msg.fix = ActiveFix{claim.rhs.range.shifted(*arg->payload_start),
                          std::to_string(l),
                          "replace " + std::to_string(r) + " by " + std::to_string(l)};
    }
    emit(msg);
    return CheckOutcome::finished;
  }

  if (cmd == "ML") {
    if (proper.size() != 2) return malformed("ML source");
    auto arg = argument(proper[1], base);
    if (!arg) return malformed("ML source");
    const std::string source = utf8::encode(trim(arg->payload));
    if (source == "crash") throw std::runtime_error("ML evaluation crashed");
    if (source.starts_with("sleep ")) {
      const long ms = std::stol(source.substr(6));
      if (!interruptible_sleep(cancel, ms)) return CheckOutcome::cancelled;
      emit(make_message(Severity::writeln, relative(proper[1], base),
                        "slept " + std::to_string(ms) + " ms"));
      return CheckOutcome::finished;
    }
    emit(make_message(Severity::writeln, relative(proper[1], base), "ML ok"));
    return CheckOutcome::finished;
  }

  if (cmd == "export_file") {
    if (proper.size() != 3) return malformed("NAME and content");
    auto name = argument(proper[1], base);
    auto body = argument(proper[2], base);
    if (!name || !body) return malformed("NAME and content");
    const std::string export_name = utf8::encode(name->payload);
    try {
      check_export_name(export_name);
    } catch (const ExportError& e) {
      emit(make_message(Severity::error, relative(proper[1], base), e.what()));
      return CheckOutcome::finished;
    }
    ExportEntry entry;
    entry.theory = in.node.header ? in.node.header->name : in.node.name.stem();
    entry.name = export_name;
    entry.payload = utf8::encode(body->payload);
    out.exports.push_back(std::move(entry));
    emit(make_message(Severity::writeln, relative(proper[1], base), "exported " + export_name));
    return CheckOutcome::finished;
  }

  if (in.span.loaded_file) {
    emit(make_message(Severity::writeln, whole, "loading file " + *in.span.loaded_file));
  }
  return CheckOutcome::finished;
}

}  // namespace pide
