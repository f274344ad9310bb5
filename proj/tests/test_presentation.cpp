#include <doctest.h>

#include <regex>

#include "pide/presentation.hpp"
#include "support.hpp"

using namespace pide;
using namespace pide::presentation;
using test::T;

namespace {

std::string latex(const std::string& src, const Antiquotations& handlers = Antiquotations::defaults()) {
  return present(T(src), demo_keywords(), SymbolTable::bundled(), handlers, Format::latex);
}

std::string html(const std::string& src, const Antiquotations& handlers = Antiquotations::defaults()) {
  return present(T(src), demo_keywords(), SymbolTable::bundled(), handlers, Format::html);
}

std::vector<Event> events_of(const std::string& src, Format f = Format::latex) {
  return events(T(src), demo_keywords(), SymbolTable::bundled(), Antiquotations::defaults(), f);
}

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

bool is_leaf(EventKind k) {
  return k == EventKind::text || k == EventKind::symbol || k == EventKind::output || k == EventKind::syntax;
}

// Opening and closing events pair up with matching levels.
bool balanced(const std::vector<Event>& es) {
  std::vector<std::pair<EventKind, int>> stack;
  auto closes = [](EventKind k) -> std::optional<EventKind> {
    switch (k) {
      case EventKind::close_heading: return EventKind::open_heading;
      case EventKind::close_text: return EventKind::open_text;
      case EventKind::close_list: return EventKind::open_list;
      case EventKind::close_item: return EventKind::open_item;
      case EventKind::close_label: return EventKind::open_label;
      case EventKind::close_code: return EventKind::open_code;
      case EventKind::close_comment: return EventKind::open_comment;
      default: return std::nullopt;
    }
  };
  for (const auto& e : es) {
    if (is_leaf(e.kind)) continue;
    if (auto open = closes(e.kind)) {
      if (stack.empty() || stack.back().first != *open) return false;
      if (*open != EventKind::open_label && stack.back().second != e.level) return false;
      stack.pop_back();
    } else {
      stack.emplace_back(e.kind, e.level);
    }
  }
  return stack.empty();
}

// LaTeX \begin/\end and HTML tags nest properly in the written output.
bool latex_balanced(const std::string& out) {
  std::vector<std::string> stack;
  const std::regex env(R"(\\(begin|end)\{([a-z]+)\})");
  for (auto it = std::sregex_iterator(out.begin(), out.end(), env); it != std::sregex_iterator(); ++it) {
    if ((*it)[1] == "begin") {
      stack.push_back((*it)[2]);
    } else {
      if (stack.empty() || stack.back() != (*it)[2]) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

bool html_balanced(const std::string& out) {
  std::vector<std::string> stack;
  const std::regex tag(R"(<(/?)([a-z0-9]+)[^>]*>)");
  for (auto it = std::sregex_iterator(out.begin(), out.end(), tag); it != std::sregex_iterator(); ++it) {
    if ((*it)[1] == "") {
      stack.push_back((*it)[2]);
    } else {
      if (stack.empty() || stack.back() != (*it)[2]) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

// Leaf events cover [0, n) contiguously and in order.
bool tiles(const std::vector<Event>& es, Offset n) {
  Offset at = 0;
  for (const auto& e : es) {
    if (!is_leaf(e.kind)) {
      if (!e.source.empty()) return false;
      continue;
    }
    if (e.source.begin != at || e.source.empty()) return false;
    at = e.source.end;
  }
  return at == n;
}

}  // namespace

TEST_CASE("text block, headings and symbols") {
  CHECK(latex("text ‹hello›") == "\\begin{isamarkuptext}%\nhello%\n\\end{isamarkuptext}\n");
  CHECK(html("text ‹hello›") == "<div class=\"text\">hello</div>\n");
  CHECK(latex("section ‹Intro›\n") == "\\section{Intro}\n");
  CHECK(html("subsection \\<open>Intro\\<close>") == "<h3>Intro</h3>\n");
  CHECK(latex("chapter \"Start\"") == "\\chapter{Start}\n");

  CHECK(latex("text ‹\\<alpha> and \\<beta>›").find("{\\isasymalpha} and {\\isasymbeta}") != std::string::npos);
  CHECK(html("text ‹\\<alpha>›") == "<div class=\"text\">α</div>\n");
  // Unknown symbols are escaped verbatim.
  CHECK(latex("text ‹\\<foo>›").find("\\textbackslash{}<foo>") != std::string::npos);
  CHECK(html("text ‹\\<foo>›").find("\\&lt;foo&gt;") != std::string::npos);
}

TEST_CASE("markdown items become environments") {
  const std::string two = "text ‹\n  \\<^item> one\n  \\<^item> two\n›";
  const auto out = latex(two);
  CHECK(count(out, "\\begin{itemize}") == 1);
  CHECK(count(out, "\\end{itemize}") == 1);
  CHECK(count(out, "\\item") == 2);
  CHECK(html(two).find("<ul><li> one\n  </li><li> two\n</li></ul>") != std::string::npos);

  const auto en = latex("text ‹\\<^enum> a\n\\<^enum> b›");
  CHECK(count(en, "\\begin{enumerate}") == 1);

  CHECK(latex("text ‹\\<^descr>‹Term› meaning›").find("\\begin{description}\n\\item[Term] meaning") != std::string::npos);
  CHECK(html("text ‹\\<^descr>‹Term› meaning›").find("<dl><dt>Term</dt><dd> meaning</dd></dl>") != std::string::npos);

  const auto nested = latex("text ‹\\<^item> a\n\\<^item>\\<^item> b\n\\<^item> c›");
  CHECK(count(nested, "\\begin{itemize}") == 2);
  CHECK(count(nested, "\\item") == 3);
  CHECK(latex_balanced(nested));
  CHECK(nested.find("\\item a\n\\begin{itemize}\n\\item b") != std::string::npos);

  // A blank line ends the list.
  const auto split = latex("text ‹\\<^item> a\n\n\\<^item> b›");
  CHECK(count(split, "\\begin{itemize}") == 2);
}

TEST_CASE("formal source and comments") {
  const auto out = latex("theory A begin\ndefinition x = \"1\" (* note *)\nlemma \"x = 1\" \\<comment> ‹why›\n");
  CHECK(out.starts_with("\\begin{isabellecode}\ntheory A begin\ndefinition x = \"1\" \\isacomment{ note }\n"));
  CHECK(out.find("lemma \"x = 1\" \\isacomment{why}") != std::string::npos);
  CHECK(count(out, "\\begin{isabellecode}") == 1);

  const auto mixed = html("definition a = \"1\"\ntext ‹x›\ndefinition b = \"2\"\n");
  CHECK(count(mixed, "<pre class=\"source\">") == 2);
  CHECK(html_balanced(mixed));
  CHECK(html("lemma \"a < b & c\"").find("&quot;a &lt; b &amp; c&quot;") != std::string::npos);
}

TEST_CASE("antiquotations") {
  CHECK(latex("text ‹see @{url \"https://x\"}›").find("see \\url{https://x}") != std::string::npos);
  CHECK(html("text ‹@{url ‹https://x?a&b›}›").find("<a href=\"https://x?a&amp;b\">") != std::string::npos);
  CHECK(latex("section ‹@{verbatim \"a_b\"}›") == "\\section{\\isatt{a\\_b}}\n");

  try {
    latex("text ‹x @{nope} y›");
    FAIL("expected PresentationError");
  } catch (const PresentationError& e) {
    CHECK(std::string(e.what()).find("\"nope\"") != std::string::npos);
    CHECK(std::string(e.what()).find("url, verbatim") != std::string::npos);
    CHECK(e.range() == Range{8, 15});
  }

  Antiquotations handlers = Antiquotations::defaults();
  handlers.add("fail", [](const Antiquotation&, Format) -> std::string { throw std::runtime_error("bad argument"); });
  CHECK_THROWS_AS(handlers.add("url", {}), std::invalid_argument);
  try {
    latex("text ‹ab @{fail x}›", handlers);
    FAIL("expected PresentationError");
  } catch (const PresentationError& e) {
    CHECK(std::string(e.what()).find("bad argument") != std::string::npos);
    CHECK(e.range() == Range{9, 18});
  }

  Antiquotation seen;
  handlers.add("echo", [&](const Antiquotation& a, Format) {
    seen = a;
    return std::string("[") + a.name + "]";
  });
  CHECK(latex("text ‹@{echo {a} ‹}› \"}\"}›", handlers).find("[echo]") != std::string::npos);
  CHECK(seen.argument == "{a} ‹}› \"}\"");
  CHECK(antiquotation_payload("\"q\\\"x\"") == "q\"x");
  CHECK(antiquotation_payload("‹a ‹b››") == "a ‹b›");
  CHECK(antiquotation_payload("a b") == "a b");
}

TEST_CASE("errors carry offsets") {
  try {
    latex("theory A begin\ntext ‹open");
    FAIL("expected PresentationError");
  } catch (const PresentationError& e) {
    CHECK(e.range().begin == 20);
    CHECK(std::string(e.what()) == "unterminated cartouche at offset 20");
  }
  CHECK_THROWS_AS(latex("text ‹x @{url \"y›"), PresentationError);
  CHECK_THROWS_AS(latex("lemma \"1 = 1"), PresentationError);
}

TEST_CASE("escaping round trip and plain text") {
  auto g = test::rng(5);
  const std::string alphabet = "abcXYZ019 \n{}$&#_%~^\\+-*/=<>.,;:!?[]";
  for (int round = 0; round < 500; ++round) {
    std::string s;
    for (std::size_t i = 0, n = test::pick(g, 40); i < n; ++i) s += alphabet[test::pick(g, alphabet.size())];
    for (Format f : {Format::latex, Format::html}) {
      CHECK(unescape(escape(s, f), f) == s);
    }
    // A backslash outside a symbol is a malformed token, not plain text.
    if (s.find('\\') != std::string::npos || s.empty()) continue;
    // Plain text: one code block of escaped verbatim output.
    const auto es = events_of(s);
    CAPTURE(s);
    REQUIRE(es.size() == 3);
    CHECK(es[0].kind == EventKind::open_code);
    CHECK(es[1].kind == EventKind::text);
    CHECK(es[2].kind == EventKind::close_code);
    const std::string out = latex(s);
    const std::string prefix = "\\begin{isabellecode}\n", suffix = "\n\\end{isabellecode}\n";
    REQUIRE(out.starts_with(prefix));
    REQUIRE(out.ends_with(suffix));
    const std::string body = unescape(out.substr(prefix.size(), out.size() - prefix.size() - suffix.size()), Format::latex);
    CHECK(body == s);
    CHECK(latex(body) == out);
  }
}

TEST_CASE("environment balance on random item sequences") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    auto g = test::rng(seed);
    // One list kind per level keeps every marker line to exactly one new item.
    std::vector<std::string> level_marker;
    for (int i = 0; i < 6; ++i) level_marker.push_back(std::vector<std::string>{"\\<^item>", "\\<^enum>", "\\<^descr>"}[test::pick(g, 3)]);
    std::string body;
    int depth = 0;
    std::size_t marker_lines = 0, expected_lists = 0;
    for (std::size_t line = 0, n = 1 + test::pick(g, 20); line < n; ++line) {
      const auto roll = test::pick(g, 10);
      if (roll == 0) {
        body += "\n";
        depth = 0;
        continue;
      }
      if (roll == 1 && depth > 0) {
        body += "    continued\n";
        continue;
      }
      const int next = std::clamp(depth + static_cast<int>(test::pick(g, 3)) - 1, 1, 6);
      if (depth == 0 && next > 1) continue;
      if (next > depth) expected_lists += static_cast<std::size_t>(next - depth);
      depth = next;
      body += std::string(test::pick(g, 3), ' ');
      for (int i = 0; i < depth; ++i) body += level_marker[static_cast<std::size_t>(i)];
      body += " entry " + std::to_string(line) + "\n";
      ++marker_lines;
    }
    const std::string src = "text ‹" + body + "›";
    const auto es = events_of(src);
    CAPTURE(src);
    CHECK(balanced(es));
    CHECK(static_cast<std::size_t>(std::count_if(es.begin(), es.end(), [](const Event& e) { return e.kind == EventKind::open_item; })) == marker_lines);
    CHECK(static_cast<std::size_t>(std::count_if(es.begin(), es.end(), [](const Event& e) { return e.kind == EventKind::open_list; })) == expected_lists);
    CHECK(latex_balanced(write(es, Format::latex)));
    CHECK(html_balanced(write(es, Format::html)));
  }
}

TEST_CASE("totality: every character lands in an event or an error") {
  const std::vector<std::string> pieces{
      "theory T imports A begin\n", "section ‹Title \\<alpha>›\n", "text ‹para\n\\<^item> x\n\\<^descr>‹l› y›\n",
      "definition c = \"1\" (* c *)\n", "lemma \"c = 1\" \\<comment> ‹ok›\n", "text ‹@{url \"u\"}›\n",
      "ML ‹sleep 1›\n", "\\<forall>x. \\<bogus>\n", "text ‹@{nope}›\n", "lemma \"oops\n", "txt ‹‹nested››\n",
      "  \n", "text \"quoted\"\n", "paragraph ‹p›"};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto g = test::rng(seed);
    std::string src;
    for (std::size_t i = 0, n = test::pick(g, 8); i < n; ++i) src += pieces[test::pick(g, pieces.size())];
    const Text text = T(src);
    CAPTURE(src);
    for (Format f : {Format::latex, Format::html}) {
      try {
        const auto es = events(text, demo_keywords(), SymbolTable::bundled(), Antiquotations::defaults(), f);
        CHECK(tiles(es, text.size()));
        CHECK(balanced(es));
        for (const auto& e : es) {
          if (e.kind == EventKind::text) CHECK(e.text == utf8::encode(text.substr(e.source.begin, e.source.length())));
        }
        const std::string out = write(es, f);
        CHECK((f == Format::latex ? latex_balanced(out) : html_balanced(out)));
      } catch (const PresentationError& e) {
        CHECK(e.range().end <= text.size());
        CHECK(e.range().begin < e.range().end);
      }
    }
  }
}

TEST_CASE("symbol table") {
  const auto& table = SymbolTable::bundled();
  CHECK(table.size() > 60);
  std::set<std::string> macros;
  for (const auto& [name, info] : table.entries()) {
    CHECK(name.starts_with("\\<"));
    CHECK(!info.display.empty());
    macros.insert(info.macro);
  }
  CHECK(macros.size() == table.size());
  REQUIRE(table.find("\\<alpha>"));
  CHECK(table.find("\\<alpha>")->display == "α");
  CHECK(parse_format("html") == Format::html);
  CHECK(!parse_format("pdf"));
}
