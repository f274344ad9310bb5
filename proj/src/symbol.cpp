#include "pide/symbol.hpp"

namespace pide {
namespace {

bool is_ascii_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }
bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

}  // namespace

std::string_view to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::plain: return "plain";
    case SymbolKind::named: return "named";
    case SymbolKind::control: return "control";
    case SymbolKind::malformed: return "malformed";
  }
  return "?";
}

TextView Symbol::name() const noexcept {
  switch (kind) {
    case SymbolKind::named: return source.substr(2, source.size() - 3);
    case SymbolKind::control: return source.substr(3, source.size() - 4);
    default: return source;
  }
}

std::size_t symbol_length(TextView text, std::size_t pos, SymbolKind* kind) {
  auto set = [&](SymbolKind k) {
    if (kind) *kind = k;
  };
  const std::size_t n = text.size();
  if (pos >= n) return 0;
  const char32_t c = text[pos];
  if (c == U'\r' && pos + 1 < n && text[pos + 1] == U'\n') {
    set(SymbolKind::plain);
    return 2;
  }
  if (c != U'\\' || pos + 1 >= n || text[pos + 1] != U'<') {
    set(SymbolKind::plain);
    return 1;
  }
  // \<ident> or \<^ident>
  std::size_t i = pos + 2;
  bool control = false;
  if (i < n && text[i] == U'^') {
    control = true;
    ++i;
  }
  if (i >= n) {
    set(SymbolKind::malformed);
    return n - pos;
  }
  if (!is_ascii_letter(text[i])) {
    set(SymbolKind::malformed);
    return 2;
  }
  ++i;
  while (i < n && (is_ascii_letter(text[i]) || is_ascii_digit(text[i]) || text[i] == U'_' ||
                   text[i] == U'\'')) {
    ++i;
  }
  if (i >= n) {
    set(SymbolKind::malformed);
    return n - pos;
  }
  if (text[i] != U'>') {
    set(SymbolKind::malformed);
    return 2;
  }
  set(control ? SymbolKind::control : SymbolKind::named);
  return i + 1 - pos;
}

std::vector<Symbol> decode_symbols(TextView text) {
  std::vector<Symbol> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    SymbolKind kind{};
    const std::size_t len = symbol_length(text, pos, &kind);
    out.push_back({kind, text.substr(pos, len), pos});
    pos += len;
  }
  return out;
}

}  // namespace pide
