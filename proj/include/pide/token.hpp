#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pide/digest.hpp"
#include "pide/keywords.hpp"
#include "pide/text.hpp"

namespace pide {

enum class TokenKind {
  command_keyword,
  keyword,
  identifier,
  number,
  quoted_string,
  cartouche,
  comment,
  whitespace,
  error,
};

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::error;
  Range range;
  TextView source;

  bool is_proper() const noexcept {
    return kind != TokenKind::whitespace && kind != TokenKind::comment;
  }
  std::string text() const { return utf8::encode(source); }
};

/// Covering tokenization of `text`. Tokens view into `text`.
///
/// Lexical classes: whitespace runs; nested `(* ... *)` comments; `"..."`
/// strings with backslash escapes; cartouches delimited by \<open>/\<close>
/// (or the display quotes) with depth counting; decimal numerals;
/// identifiers of letters, digits, `_` and `'` starting with a letter
/// (Greek letter symbols count as letters); symbolic identifiers; single
/// delimiters. Unterminated strings, comments and cartouches become one
/// error token running to the end of the text.
std::vector<Token> tokenize(TextView text, const KeywordTable& keywords);

/// One level of string quoting: wraps in double quotes, escaping `\` and `"`.
Text quote_string(TextView payload);

/// Inverse of quote_string; nullopt when `literal` is not a well-formed
/// quoted string.
std::optional<Text> unquote_string(TextView literal);

/// Quotes `payload` and then embeds the result `depth` more times, yielding
/// a literal whose original quotes carry 2^depth - 1 backslashes each.
Text quote_depth_demo(TextView payload, unsigned depth);

/// Content of a cartouche token without the outer delimiters.
TextView cartouche_body(TextView cartouche);

/// A command span in node text: one command keyword with its arguments,
/// or the prelude before the first command (empty command name).
struct CommandSpan {
  std::uint64_t id = 0;  // assigned by the document model; 0 = unassigned
  std::string command;
  Range range;
  Text source;
  Digest digest;
  /// Argument of a load command, with the extension hint applied.
  std::optional<std::string> loaded_file;

  bool is_prelude() const noexcept { return command.empty(); }
};

std::vector<CommandSpan> parse_spans(const std::vector<Token>& tokens,
                                     const KeywordTable& keywords);

}  // namespace pide
