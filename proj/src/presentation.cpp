#include "pide/presentation.hpp"

#include <algorithm>
#include <cctype>

#include "pide/symbol.hpp"
#include "pide/token.hpp"

namespace pide::presentation {
namespace {

constexpr std::u32string_view markers[] = {U"\\<^item>", U"\\<^enum>", U"\\<^descr>"};

std::optional<int> heading_level(const std::string& command) {
  static const std::map<std::string, int> levels{
      {"chapter", 0}, {"section", 1}, {"subsection", 2}, {"subsubsection", 3}, {"paragraph", 4}};
  auto it = levels.find(command);
  if (it == levels.end()) return std::nullopt;
  return it->second;
}

bool is_text_command(const std::string& command) {
  return command == "text" || command == "txt" || command == "text_raw";
}

bool is_name_char(char32_t c) {
  return (c < 128 && std::isalnum(static_cast<unsigned char>(c))) || c == U'_' || c == U'.';
}

bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == U'\r'; }

std::size_t open_length(TextView cartouche) {
  return cartouche.starts_with(symbols::open) ? symbols::open.size() : 1;
}

std::size_t close_length(TextView cartouche) {
  return cartouche.ends_with(symbols::close) ? symbols::close.size() : 1;
}

bool at_cartouche_open(TextView text, Offset pos) {
  return text.substr(pos).starts_with(symbols::open) || text.substr(pos).starts_with(symbols::open_display);
}

bool at_cartouche_close(TextView text, Offset pos) {
  return text.substr(pos).starts_with(symbols::close) || text.substr(pos).starts_with(symbols::close_display);
}

std::string token_error(const Token& t) {
  const TextView s = t.source;
  std::string what = "malformed token";
  if (s.starts_with(U"\"")) {
    what = "unterminated string";
  } else if (s.starts_with(U"(*")) {
    what = "unterminated comment";
  } else if (s.starts_with(symbols::open) || s.starts_with(symbols::open_display)) {
    what = "unterminated cartouche";
  } else if (s.starts_with(symbols::close) || s.starts_with(symbols::close_display)) {
    what = "unbalanced cartouche close";
  }
  return what + " at offset " + std::to_string(t.range.begin);
}

// End of the `@{...}` group starting at `pos`, skipping nested braces,
// strings and cartouches.
std::optional<Offset> antiquotation_end(TextView text, Offset pos) {
  Offset i = pos + 2;
  int depth = 1;
  while (i < text.size()) {
    const char32_t c = text[i];
    if (c == U'"') {
      ++i;
      while (i < text.size() && text[i] != U'"') i += text[i] == U'\\' ? 2 : 1;
      if (i >= text.size()) return std::nullopt;
      ++i;
    } else if (at_cartouche_open(text, i)) {
      int nesting = 0;
      do {
        if (at_cartouche_open(text, i)) {
          ++nesting;
        } else if (at_cartouche_close(text, i)) {
          --nesting;
        }
        i += symbol_length(text, i);
      } while (nesting > 0 && i < text.size());
      if (nesting > 0) return std::nullopt;
    } else if (c == U'{') {
      ++depth;
      ++i;
    } else if (c == U'}') {
      ++i;
      if (--depth == 0) return i;
    } else {
      i += symbol_length(text, i);
    }
  }
  return std::nullopt;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class Builder {
 public:
  Builder(TextView text, const KeywordTable& keywords, const SymbolTable& symbols,
          const Antiquotations& handlers, Format format)
      : text_(text), keywords_(keywords), symbols_(symbols), handlers_(handlers), format_(format) {}

  std::vector<Event> run() {
    const auto tokens = tokenize(text_, keywords_);
    for (const auto& span : parse_spans(tokens, keywords_)) {
      std::vector<Token> own;
      for (const auto& t : tokens) {
        if (span.range.contains(t.range) && !t.range.empty()) own.push_back(t);
      }
      if (!markup_command(span, own)) formal(own);
    }
    close_code();
    return std::move(out_);
  }

 private:
  TextView text_;
  const KeywordTable& keywords_;
  const SymbolTable& symbols_;
  const Antiquotations& handlers_;
  Format format_;
  std::vector<Event> out_;
  bool code_open_ = false;
  std::vector<ListKind> lists_;

  void structural(EventKind kind, int level = 0) { out_.push_back({kind, "", "", level, {}}); }

  void leaf(EventKind kind, Range r) {
    if (r.empty()) return;
    if (!out_.empty() && out_.back().kind == kind && !out_.back().source.empty() &&
        out_.back().source.end == r.begin) {
      out_.back().text += utf8::encode(text_.substr(r.begin, r.length()));
      out_.back().source.end = r.end;
      return;
    }
    out_.push_back({kind, utf8::encode(text_.substr(r.begin, r.length())), "", 0, r});
  }
  void text(Range r) { leaf(EventKind::text, r); }
  void syntax(Range r) {
    if (r.empty()) return;
    if (!out_.empty() && out_.back().kind == EventKind::syntax && out_.back().source.end == r.begin) {
      out_.back().source.end = r.end;
      return;
    }
    out_.push_back({EventKind::syntax, "", "", 0, r});
  }

  void open_code() {
    if (!code_open_) structural(EventKind::open_code);
    code_open_ = true;
  }
  void close_code() {
    if (code_open_) structural(EventKind::close_code);
    code_open_ = false;
  }

  // Symbols and plain characters of `r`; antiquotations when asked.
  void inline_source(Range r, bool antiquotations) {
    Offset i = r.begin;
    while (i < r.end) {
      if (antiquotations && text_[i] == U'@' && i + 1 < r.end && text_[i + 1] == U'{') {
        auto end = antiquotation_end(text_, i);
        if (!end || *end > r.end) {
          throw PresentationError("unterminated antiquotation at offset " + std::to_string(i), {i, r.end});
        }
        antiquotation({i, *end});
        i = *end;
        continue;
      }
      SymbolKind kind = SymbolKind::plain;
      const std::size_t n = std::min<std::size_t>(symbol_length(text_, i, &kind), r.end - i);
      const Range s{i, i + n};
      if (kind == SymbolKind::named || kind == SymbolKind::control) {
        const std::string source = utf8::encode(text_.substr(i, n));
        if (const SymbolInfo* info = symbols_.find(source)) {
          out_.push_back({EventKind::symbol, info->macro, info->display, 0, s});
          i += n;
          continue;
        }
      }
      text(s);
      i += n;
    }
  }

  void antiquotation(Range r) {
    Offset i = r.begin + 2;
    while (i < r.end - 1 && is_name_char(text_[i])) {
      ++i;
    }
    Antiquotation a;
    a.name = utf8::encode(text_.substr(r.begin + 2, i - r.begin - 2));
    a.argument = trim(utf8::encode(text_.substr(i, r.end - 1 - i)));
    a.range = r;
    const AntiquotationHandler* handler = handlers_.find(a.name);
    if (!handler) {
      std::string known;
      for (const auto& n : handlers_.names()) known += (known.empty() ? "" : ", ") + n;
      throw PresentationError("unknown antiquotation \"" + a.name + "\" (registered: " + known + ")", r);
    }
    std::string output;
    try {
      output = (*handler)(a, format_);
    } catch (const PresentationError&) {
      throw;
    } catch (const std::exception& e) {
      throw PresentationError("antiquotation \"" + a.name + "\" failed: " + e.what(), r);
    }
    out_.push_back({EventKind::output, std::move(output), "", 0, r});
  }

  void formal(const std::vector<Token>& tokens) {
    open_code();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const Token& t = tokens[i];
      if (t.kind == TokenKind::error) throw PresentationError(token_error(t), t.range);
      if (t.kind == TokenKind::comment) {
        structural(EventKind::open_comment);
        syntax({t.range.begin, t.range.begin + 2});
        inline_source({t.range.begin + 2, t.range.end - 2}, false);
        syntax({t.range.end - 2, t.range.end});
        structural(EventKind::close_comment);
        continue;
      }
      if (t.source == symbols::comment) {
        std::size_t j = i + 1;
        while (j < tokens.size() && tokens[j].kind == TokenKind::whitespace) ++j;
        if (j < tokens.size() && tokens[j].kind == TokenKind::cartouche) {
          structural(EventKind::open_comment);
          syntax({t.range.begin, tokens[j].range.begin});
          cartouche(tokens[j], [&](Range body) { inline_source(body, true); });
          structural(EventKind::close_comment);
          i = j;
          continue;
        }
      }
      inline_source(t.range, false);
    }
  }

  template <typename Body>
  void cartouche(const Token& t, Body body) {
    const std::size_t open = open_length(t.source), close = close_length(t.source);
    syntax({t.range.begin, t.range.begin + open});
    body(Range{t.range.begin + open, t.range.end - close});
    syntax({t.range.end - close, t.range.end});
  }

  // Markup commands with exactly one text argument; false otherwise.
  bool markup_command(const CommandSpan& span, const std::vector<Token>& tokens) {
    const auto level = heading_level(span.command);
    if (!level && !is_text_command(span.command)) return false;
    std::optional<std::size_t> argument;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      if (tokens[i].kind == TokenKind::whitespace) continue;
      if (argument || (tokens[i].kind != TokenKind::cartouche && tokens[i].kind != TokenKind::quoted_string)) {
        return false;
      }
      argument = i;
    }
    if (!argument) return false;
    close_code();
    const Token& arg = tokens[*argument];
    structural(level ? EventKind::open_heading : EventKind::open_text, level.value_or(0));
    syntax({tokens.front().range.begin, arg.range.begin});
    auto body = [&](Range r) {
      if (level) {
        inline_source(r, true);
      } else {
        document_text(r);
      }
    };
    if (arg.kind == TokenKind::cartouche) {
      cartouche(arg, body);
    } else {
      syntax({arg.range.begin, arg.range.begin + 1});
      body({arg.range.begin + 1, arg.range.end - 1});
      syntax({arg.range.end - 1, arg.range.end});
    }
    structural(level ? EventKind::close_heading : EventKind::close_text, level.value_or(0));
    syntax({arg.range.end, tokens.back().range.end});
    return true;
  }

  // Body of a text block: lines with markdown item markers.
  void document_text(Range r) {
    Offset line_start = r.begin;
    Offset i = r.begin;
    while (i < r.end) {
      if (text_[i] == U'@' && i + 1 < r.end && text_[i + 1] == U'{') {
        auto end = antiquotation_end(text_, i);
        if (!end || *end > r.end) {
          throw PresentationError("unterminated antiquotation at offset " + std::to_string(i), {i, r.end});
        }
        i = *end;
      } else if (text_[i] == U'\n') {
        line({line_start, i});
        text({i, i + 1});
        line_start = ++i;
      } else {
        ++i;
      }
    }
    line({line_start, r.end});
    close_lists(0);
  }

  void line(Range r) {
    Offset p = r.begin;
    while (p < r.end && is_space(text_[p])) ++p;
    text({r.begin, p});
    std::vector<std::pair<ListKind, Range>> found;
    Offset q = p;
    while (true) {
      Offset next = q;
      while (!found.empty() && next < r.end && is_space(text_[next])) ++next;
      bool matched = false;
      for (int k = 0; k < 3; ++k) {
        if (text_.substr(next, r.end - next).starts_with(markers[k])) {
          found.emplace_back(static_cast<ListKind>(k), Range{next, next + markers[k].size()});
          q = next + markers[k].size();
          matched = true;
          break;
        }
      }
      if (!matched) break;
    }
    if (found.empty()) {
      if (p == r.end) close_lists(0);
      inline_source({p, r.end}, true);
      return;
    }
    std::vector<ListKind> kinds;
    for (const auto& f : found) kinds.push_back(f.first);
    std::size_t common = 0;
    while (common < std::min(lists_.size(), kinds.size()) && lists_[common] == kinds[common]) ++common;
    if (common == kinds.size()) {
      close_lists(kinds.size());
      structural(EventKind::close_item, static_cast<int>(kinds.back()));
      common = kinds.size() - 1;
    } else {
      close_lists(common);
    }
    // Marker symbols and the spaces between them are consumed.
    syntax({found.front().second.begin, q});
    for (std::size_t level = common; level < kinds.size(); ++level) {
      if (level >= lists_.size()) {
        structural(EventKind::open_list, static_cast<int>(kinds[level]));
        lists_.push_back(kinds[level]);
      }
      structural(EventKind::open_item, static_cast<int>(kinds[level]));
      if (kinds[level] != ListKind::description) continue;
      structural(EventKind::open_label);
      if (level + 1 == kinds.size() && q < r.end && at_cartouche_open(text_, q)) {
        const auto tokens = tokenize(text_.substr(q, r.end - q), keywords_);
        if (!tokens.empty() && tokens.front().kind == TokenKind::cartouche) {
          Token t = tokens.front();
          t.range = t.range.shifted(q);
          cartouche(t, [&](Range body) { inline_source(body, true); });
          q = t.range.end;
        }
      }
      structural(EventKind::close_label);
    }
    inline_source({q, r.end}, true);
  }

  void close_lists(std::size_t depth) {
    while (lists_.size() > depth) {
      structural(EventKind::close_item, static_cast<int>(lists_.back()));
      structural(EventKind::close_list, static_cast<int>(lists_.back()));
      lists_.pop_back();
    }
  }
};

const char* latex_list_env(int kind) {
  switch (static_cast<ListKind>(kind)) {
    case ListKind::item: return "itemize";
    case ListKind::enumerate: return "enumerate";
    case ListKind::description: return "description";
  }
  return "itemize";
}

const char* html_list_tag(int kind) {
  switch (static_cast<ListKind>(kind)) {
    case ListKind::item: return "ul";
    case ListKind::enumerate: return "ol";
    case ListKind::description: return "dl";
  }
  return "ul";
}

void write_latex(std::string& out, const Event& e) {
  static const char* headings[] = {"chapter", "section", "subsection", "subsubsection", "paragraph"};
  switch (e.kind) {
    case EventKind::open_heading: out += "\\" + std::string(headings[e.level]) + "{"; break;
    case EventKind::close_heading: out += "}\n"; break;
    case EventKind::open_text: out += "\\begin{isamarkuptext}%\n"; break;
    case EventKind::close_text: out += "%\n\\end{isamarkuptext}\n"; break;
    case EventKind::open_list: out += "\\begin{" + std::string(latex_list_env(e.level)) + "}\n"; break;
    case EventKind::close_list: out += "\n\\end{" + std::string(latex_list_env(e.level)) + "}\n"; break;
    case EventKind::open_item: out += "\\item"; break;
    case EventKind::close_item: break;
    case EventKind::open_label: out += "["; break;
    case EventKind::close_label: out += "]"; break;
    case EventKind::open_code: out += "\\begin{isabellecode}\n"; break;
    case EventKind::close_code: out += "\n\\end{isabellecode}\n"; break;
    case EventKind::open_comment: out += "\\isacomment{"; break;
    case EventKind::close_comment: out += "}"; break;
    case EventKind::text: out += escape(e.text, Format::latex); break;
    case EventKind::symbol: out += "{" + e.text + "}"; break;
    case EventKind::output: out += e.text; break;
    case EventKind::syntax: break;
  }
}

void write_html(std::string& out, const Event& e) {
  switch (e.kind) {
    case EventKind::open_heading: out += "<h" + std::to_string(e.level + 1) + ">"; break;
    case EventKind::close_heading: out += "</h" + std::to_string(e.level + 1) + ">\n"; break;
    case EventKind::open_text: out += "<div class=\"text\">"; break;
    case EventKind::close_text: out += "</div>\n"; break;
    case EventKind::open_list: out += "<" + std::string(html_list_tag(e.level)) + ">"; break;
    case EventKind::close_list: out += "</" + std::string(html_list_tag(e.level)) + ">"; break;
    case EventKind::open_item:
      if (static_cast<ListKind>(e.level) != ListKind::description) out += "<li>";
      break;
    case EventKind::close_item:
      out += static_cast<ListKind>(e.level) == ListKind::description ? "</dd>" : "</li>";
      break;
    case EventKind::open_label: out += "<dt>"; break;
    case EventKind::close_label: out += "</dt><dd>"; break;
    case EventKind::open_code: out += "<pre class=\"source\">"; break;
    case EventKind::close_code: out += "</pre>\n"; break;
    case EventKind::open_comment: out += "<span class=\"comment\">"; break;
    case EventKind::close_comment: out += "</span>"; break;
    case EventKind::text: out += escape(e.text, Format::html); break;
    case EventKind::symbol: out += escape(e.display, Format::html); break;
    case EventKind::output: out += e.text; break;
    case EventKind::syntax: break;
  }
}

}  // namespace

std::string_view to_string(Format f) { return f == Format::latex ? "latex" : "html"; }

std::optional<Format> parse_format(std::string_view s) {
  if (s == "latex") return Format::latex;
  if (s == "html") return Format::html;
  return std::nullopt;
}

void SymbolTable::add(const std::string& symbol, SymbolInfo info) { entries_[symbol] = std::move(info); }

const SymbolInfo* SymbolTable::find(const std::string& symbol) const {
  auto it = entries_.find(symbol);
  return it == entries_.end() ? nullptr : &it->second;
}

const SymbolTable& SymbolTable::bundled() {
  static const SymbolTable table = [] {
    SymbolTable t;
    const std::pair<const char*, const char*> named[] = {
        {"alpha", "α"}, {"beta", "β"}, {"gamma", "γ"}, {"delta", "δ"}, {"epsilon", "ε"},
        {"zeta", "ζ"}, {"eta", "η"}, {"theta", "θ"}, {"iota", "ι"}, {"kappa", "κ"},
        {"lambda", "λ"}, {"mu", "μ"}, {"nu", "ν"}, {"xi", "ξ"}, {"pi", "π"},
        {"rho", "ρ"}, {"sigma", "σ"}, {"tau", "τ"}, {"upsilon", "υ"}, {"phi", "φ"},
        {"chi", "χ"}, {"psi", "ψ"}, {"omega", "ω"}, {"Gamma", "Γ"}, {"Delta", "Δ"},
        {"Theta", "Θ"}, {"Lambda", "Λ"}, {"Xi", "Ξ"}, {"Pi", "Π"}, {"Sigma", "Σ"},
        {"Upsilon", "Υ"}, {"Phi", "Φ"}, {"Psi", "Ψ"}, {"Omega", "Ω"}, {"forall", "∀"},
        {"exists", "∃"}, {"not", "¬"}, {"and", "∧"}, {"or", "∨"}, {"longrightarrow", "⟶"},
        {"Longrightarrow", "⟹"}, {"rightarrow", "→"}, {"Rightarrow", "⇒"}, {"leftarrow", "←"},
        {"longleftrightarrow", "⟷"}, {"equiv", "≡"}, {"noteq", "≠"}, {"le", "≤"}, {"ge", "≥"},
        {"in", "∈"}, {"notin", "∉"}, {"subseteq", "⊆"}, {"subset", "⊂"}, {"union", "∪"},
        {"inter", "∩"}, {"times", "×"}, {"emptyset", "∅"}, {"top", "⊤"}, {"bottom", "⊥"},
        {"lbrakk", "⟦"}, {"rbrakk", "⟧"}, {"langle", "⟨"}, {"rangle", "⟩"}, {"circ", "∘"},
        {"infinity", "∞"}, {"nat", "ℕ"}, {"int", "ℤ"}, {"real", "ℝ"}, {"bullet", "∙"},
        {"dots", "…"}, {"open", "‹"}, {"close", "›"}, {"comment", "—"}};
    for (const auto& [name, display] : named) {
      t.add("\\<" + std::string(name) + ">", {"\\isasym" + std::string(name), display});
    }
    const std::pair<const char*, const char*> control[] = {
        {"sub", "⇩"}, {"sup", "⇧"}, {"bold", "❙"}, {"item", "▪"}, {"enum", "▸"}, {"descr", "➧"}};
    for (const auto& [name, display] : control) {
      t.add("\\<^" + std::string(name) + ">", {"\\isactrl" + std::string(name), display});
    }
    return t;
  }();
  return table;
}

std::string antiquotation_payload(const std::string& argument) {
  const Text arg = utf8::decode(argument);
  KeywordTable none;
  const auto tokens = tokenize(arg, none);
  if (tokens.size() != 1) return argument;
  if (tokens[0].kind == TokenKind::quoted_string) {
    if (auto s = unquote_string(tokens[0].source)) return utf8::encode(*s);
  }
  if (tokens[0].kind == TokenKind::cartouche) return utf8::encode(cartouche_body(tokens[0].source));
  return argument;
}

void Antiquotations::add(const std::string& name, AntiquotationHandler handler) {
  if (name.empty()) throw std::invalid_argument("empty antiquotation name");
  if (!handlers_.emplace(name, std::move(handler)).second) {
    throw std::invalid_argument("duplicate antiquotation \"" + name + "\"");
  }
}

const AntiquotationHandler* Antiquotations::find(const std::string& name) const {
  auto it = handlers_.find(name);
  return it == handlers_.end() ? nullptr : &it->second;
}

std::vector<std::string> Antiquotations::names() const {
  std::vector<std::string> out;
  for (const auto& [name, handler] : handlers_) out.push_back(name);
  return out;
}

Antiquotations Antiquotations::defaults() {
  Antiquotations a;
  a.add("url", [](const Antiquotation& q, Format f) {
    const std::string url = antiquotation_payload(q.argument);
    if (url.empty()) throw std::invalid_argument("empty URL");
    if (f == Format::latex) return "\\url{" + url + "}";
    const std::string escaped = escape(url, Format::html);
    return "<a href=\"" + escaped + "\">" + escaped + "</a>";
  });
  a.add("verbatim", [](const Antiquotation& q, Format f) {
    const std::string body = escape(antiquotation_payload(q.argument), f);
    return f == Format::latex ? "\\isatt{" + body + "}" : "<code>" + body + "</code>";
  });
  return a;
}

PresentationError::PresentationError(const std::string& message, Range range)
    : std::runtime_error(message), range_(range) {}

std::vector<Event> events(TextView text, const KeywordTable& keywords, const SymbolTable& symbols,
                          const Antiquotations& handlers, Format format) {
  return Builder(text, keywords, symbols, handlers, format).run();
}

std::string write(const std::vector<Event>& events, Format format) {
  std::string out;
  bool after_item = false;
  for (const auto& e : events) {
    if (format == Format::html) {
      write_html(out, e);
      continue;
    }
    if (e.kind == EventKind::open_label) after_item = false;
    if (after_item && e.kind != EventKind::syntax) {
      if (e.kind != EventKind::text || !std::isspace(static_cast<unsigned char>(e.text.front()))) out += ' ';
      after_item = false;
    }
    write_latex(out, e);
    if (e.kind == EventKind::open_item || e.kind == EventKind::close_label) after_item = true;
  }
  return out;
}

std::string present(TextView text, const KeywordTable& keywords, const SymbolTable& symbols,
                    const Antiquotations& handlers, Format format) {
  return write(events(text, keywords, symbols, handlers, format), format);
}

std::string escape(std::string_view text, Format format) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (format == Format::html) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
      continue;
    }
    switch (c) {
      case '\\': out += "\\textbackslash{}"; break;
      case '^': out += "\\textasciicircum{}"; break;
      case '~': out += "\\textasciitilde{}"; break;
      case '{':
      case '}':
      case '$':
      case '&':
      case '#':
      case '_':
      case '%':
        out += '\\';
        out += c;
        break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view text, Format format) {
  static const std::pair<std::string_view, char> html[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}};
  static const std::pair<std::string_view, char> latex[] = {
      {"\\textbackslash{}", '\\'}, {"\\textasciicircum{}", '^'}, {"\\textasciitilde{}", '~'},
      {"\\{", '{'}, {"\\}", '}'}, {"\\$", '$'}, {"\\&", '&'}, {"\\#", '#'}, {"\\_", '_'}, {"\\%", '%'}};
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    if (format == Format::html) {
      for (const auto& [seq, c] : html) {
        if (text.substr(i).starts_with(seq)) {
          out += c;
          i += seq.size();
          matched = true;
          break;
        }
      }
    } else {
      for (const auto& [seq, c] : latex) {
        if (text.substr(i).starts_with(seq)) {
          out += c;
          i += seq.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out += text[i++];
  }
  return out;
}

}  // namespace pide::presentation
