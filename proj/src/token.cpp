#include "pide/token.hpp"

#include <array>

#include "pide/symbol.hpp"

namespace pide {
namespace {

constexpr std::array<std::u32string_view, 48> greek_letters = {
    U"alpha",   U"beta",   U"gamma",   U"delta",  U"epsilon", U"zeta",  U"eta",     U"theta",
    U"iota",    U"kappa",  U"lambda",  U"mu",     U"nu",      U"xi",    U"pi",      U"rho",
    U"sigma",   U"tau",    U"upsilon", U"phi",    U"chi",     U"psi",   U"omega",   U"Gamma",
    U"Delta",   U"Theta",  U"Lambda",  U"Xi",     U"Pi",      U"Sigma", U"Upsilon", U"Phi",
    U"Psi",     U"Omega",  U"aa",      U"bb",     U"cc",      U"dd",    U"ee",      U"ff",
    U"AA",      U"BB",     U"CC",      U"DD",     U"EE",      U"FF",    U"GG",      U"HH",
};

bool is_whitespace(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f';
}
bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }
bool is_ascii_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }
bool is_symbolic(char32_t c) {
  return std::u32string_view(U"!#$%&*+-/<=>?@^_|~").find(c) != std::u32string_view::npos;
}
bool is_delimiter(char32_t c) {
  return std::u32string_view(U"()[]{},.;:").find(c) != std::u32string_view::npos;
}

class Scanner {
 public:
  Scanner(TextView text, const KeywordTable& keywords) : text_(text), keywords_(keywords) {}

  std::vector<Token> run() {
    while (pos_ < text_.size()) scan_one();
    return std::move(tokens_);
  }

 private:
  TextView text_;
  const KeywordTable& keywords_;
  std::size_t pos_ = 0;
  std::vector<Token> tokens_;

  std::size_t sym_len(std::size_t at, SymbolKind* kind = nullptr) const {
    return symbol_length(text_, at, kind);
  }

  bool at(std::size_t p, std::u32string_view s) const { return text_.substr(p, s.size()) == s; }

  std::size_t open_len(std::size_t p) const {
    if (at(p, symbols::open)) return symbols::open.size();
    if (at(p, symbols::open_display)) return symbols::open_display.size();
    return 0;
  }
  std::size_t close_len(std::size_t p) const {
    if (at(p, symbols::close)) return symbols::close.size();
    if (at(p, symbols::close_display)) return symbols::close_display.size();
    return 0;
  }

  // Letter-like symbol length at p, 0 if none.
  std::size_t letter_len(std::size_t p) const {
    if (p >= text_.size()) return 0;
    const char32_t c = text_[p];
    if (is_ascii_letter(c)) return 1;
    if (c > 0x7F && c != 0x2039 && c != 0x203A && c != 0xFFFD) return 1;
    SymbolKind kind{};
    const std::size_t len = sym_len(p, &kind);
    if (kind == SymbolKind::named) {
      const TextView name = text_.substr(p + 2, len - 3);
      for (auto g : greek_letters) {
        if (g == name) return len;
      }
    }
    return 0;
  }

  void emit(TokenKind kind, std::size_t start) {
    tokens_.push_back({kind, {start, pos_}, text_.substr(start, pos_ - start)});
  }

  void error_to_end(std::size_t start) {
    pos_ = text_.size();
    emit(TokenKind::error, start);
  }

  void scan_one() {
    const std::size_t start = pos_;
    const char32_t c = text_[pos_];

    if (is_whitespace(c)) {
      while (pos_ < text_.size() && is_whitespace(text_[pos_])) ++pos_;
      return emit(TokenKind::whitespace, start);
    }
    if (at(pos_, U"(*")) return scan_comment(start);
    if (c == U'"') return scan_string(start);
    if (std::size_t len = open_len(pos_)) return scan_cartouche(start, len);
    if (std::size_t len = close_len(pos_)) {
      pos_ += len;
      return emit(TokenKind::error, start);
    }
    if (is_digit(c)) {
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      return emit(TokenKind::number, start);
    }
    if (std::size_t len = letter_len(pos_)) {
      pos_ += len;
      while (pos_ < text_.size()) {
        const char32_t d = text_[pos_];
        if (is_digit(d) || d == U'_' || d == U'\'') {
          ++pos_;
        } else if (std::size_t l = letter_len(pos_)) {
          pos_ += l;
        } else {
          break;
        }
      }
      const std::string word = utf8::encode(text_.substr(start, pos_ - start));
      if (keywords_.is_command(word)) return emit(TokenKind::command_keyword, start);
      if (keywords_.is_minor(word)) return emit(TokenKind::keyword, start);
      return emit(TokenKind::identifier, start);
    }
    if (std::size_t len = minor_symbolic(pos_)) {
      pos_ += len;
      return emit(TokenKind::keyword, start);
    }
    if (is_symbolic(c)) {
      while (pos_ < text_.size() && is_symbolic(text_[pos_])) ++pos_;
      return emit(TokenKind::identifier, start);
    }
    if (is_delimiter(c)) {
      ++pos_;
      return emit(TokenKind::keyword, start);
    }
    SymbolKind kind{};
    pos_ += sym_len(pos_, &kind);
    if (kind == SymbolKind::named || kind == SymbolKind::control) {
      const std::string word = utf8::encode(text_.substr(start, pos_ - start));
      if (keywords_.is_minor(word)) return emit(TokenKind::keyword, start);
      return emit(TokenKind::identifier, start);
    }
    emit(TokenKind::error, start);
  }

  // Longest minor keyword not starting with a letter or digit.
  std::size_t minor_symbolic(std::size_t p) const {
    const std::size_t max = std::min(keywords_.max_minor_length(), text_.size() - p);
    for (std::size_t len = max; len > 0; --len) {
      if (keywords_.is_minor(utf8::encode(text_.substr(p, len)))) return len;
    }
    return 0;
  }

  void scan_comment(std::size_t start) {
    int depth = 0;
    while (pos_ < text_.size()) {
      if (at(pos_, U"(*")) {
        ++depth;
        pos_ += 2;
      } else if (at(pos_, U"*)")) {
        pos_ += 2;
        if (--depth == 0) return emit(TokenKind::comment, start);
      } else {
        pos_ += sym_len(pos_);
      }
    }
    error_to_end(start);
  }

  void scan_string(std::size_t start) {
    ++pos_;
    while (pos_ < text_.size()) {
      const char32_t d = text_[pos_];
      if (d == U'"') {
        ++pos_;
        return emit(TokenKind::quoted_string, start);
      }
      if (d == U'\\') {
        SymbolKind kind{};
        const std::size_t len = sym_len(pos_, &kind);
        if (kind == SymbolKind::named || kind == SymbolKind::control) {
          pos_ += len;
        } else if (pos_ + 1 < text_.size()) {
          pos_ += 2;
        } else {
          break;
        }
        continue;
      }
      pos_ += sym_len(pos_);
    }
    error_to_end(start);
  }

  void scan_cartouche(std::size_t start, std::size_t open) {
    pos_ += open;
    int depth = 1;
    while (pos_ < text_.size()) {
      if (std::size_t len = open_len(pos_)) {
        ++depth;
        pos_ += len;
      } else if (std::size_t len = close_len(pos_)) {
        pos_ += len;
        if (--depth == 0) return emit(TokenKind::cartouche, start);
      } else {
        pos_ += sym_len(pos_);
      }
    }
    error_to_end(start);
  }
};

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::command_keyword: return "command-keyword";
    case TokenKind::keyword: return "keyword";
    case TokenKind::identifier: return "identifier";
    case TokenKind::number: return "number";
    case TokenKind::quoted_string: return "quoted-string";
    case TokenKind::cartouche: return "cartouche";
    case TokenKind::comment: return "comment";
    case TokenKind::whitespace: return "whitespace";
    case TokenKind::error: return "error";
  }
  return "?";
}

std::vector<Token> tokenize(TextView text, const KeywordTable& keywords) {
  return Scanner(text, keywords).run();
}

Text quote_string(TextView payload) {
  Text out;
  out.reserve(payload.size() + 2);
  out.push_back(U'"');
  for (char32_t c : payload) {
    if (c == U'"' || c == U'\\') out.push_back(U'\\');
    out.push_back(c);
  }
  out.push_back(U'"');
  return out;
}

std::optional<Text> unquote_string(TextView literal) {
  if (literal.size() < 2 || literal.front() != U'"' || literal.back() != U'"') return std::nullopt;
  const TextView body = literal.substr(1, literal.size() - 2);
  Text out;
  std::size_t i = 0;
  while (i < body.size()) {
    const char32_t c = body[i];
    if (c == U'"') return std::nullopt;
    if (c != U'\\') {
      out.push_back(c);
      ++i;
      continue;
    }
    SymbolKind kind{};
    const std::size_t len = symbol_length(body, i, &kind);
    if (kind == SymbolKind::named || kind == SymbolKind::control) {
      out.append(body.substr(i, len));
      i += len;
    } else if (i + 1 < body.size()) {
      out.push_back(body[i + 1]);
      i += 2;
    } else {
      return std::nullopt;
    }
  }
  return out;
}

Text quote_depth_demo(TextView payload, unsigned depth) {
  Text result = quote_string(payload);
  for (unsigned k = 0; k < depth; ++k) result = quote_string(result);
  return result;
}

TextView cartouche_body(TextView cartouche) {
  std::size_t open = 0;
  if (cartouche.starts_with(symbols::open)) {
    open = symbols::open.size();
  } else if (cartouche.starts_with(symbols::open_display)) {
    open = symbols::open_display.size();
  }
  std::size_t close = 0;
  if (cartouche.ends_with(symbols::close)) {
    close = symbols::close.size();
  } else if (cartouche.ends_with(symbols::close_display)) {
    close = symbols::close_display.size();
  }
  if (open + close > cartouche.size()) return {};
  return cartouche.substr(open, cartouche.size() - open - close);
}

namespace {

std::optional<std::string> load_argument(const std::vector<Token>& tokens, std::size_t first,
                                         std::size_t last, const CommandAttrs& attrs) {
  for (std::size_t i = first; i < last; ++i) {
    const Token& tok = tokens[i];
    if (!tok.is_proper()) continue;
    std::optional<std::string> name;
    if (tok.kind == TokenKind::quoted_string) {
      if (auto s = unquote_string(tok.source)) name = utf8::encode(*s);
    } else if (tok.kind == TokenKind::cartouche) {
      name = utf8::encode(cartouche_body(tok.source));
    } else if (tok.kind == TokenKind::identifier) {
      name = tok.text();
    }
    if (!name) return std::nullopt;
    const auto slash = name->rfind('/');
    const auto base = slash == std::string::npos ? *name : name->substr(slash + 1);
    if (attrs.file_extension && base.find('.') == std::string::npos) {
      *name += "." + *attrs.file_extension;
    }
    return name;
  }
  return std::nullopt;
}

}  // namespace

std::vector<CommandSpan> parse_spans(const std::vector<Token>& tokens,
                                     const KeywordTable& keywords) {
  std::vector<CommandSpan> spans;
  std::size_t first = 0;
  auto close_span = [&](std::size_t last) {
    if (first == last) return;
    CommandSpan span;
    if (tokens[first].kind == TokenKind::command_keyword) span.command = tokens[first].text();
    span.range = {tokens[first].range.begin, tokens[last - 1].range.end};
    for (std::size_t i = first; i < last; ++i) span.source.append(tokens[i].source);
    span.digest = Digest::of(span.source);
    if (const CommandAttrs* attrs = keywords.command(span.command);
        attrs && attrs->is_load_command) {
      span.loaded_file = load_argument(tokens, first + 1, last, *attrs);
    }
    spans.push_back(std::move(span));
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind == TokenKind::command_keyword && i != first) {
      close_span(i);
      first = i;
    }
  }
  close_span(tokens.size());
  return spans;
}

}  // namespace pide
