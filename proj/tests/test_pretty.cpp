#include <doctest.h>

#include <algorithm>

#include "pide/pretty.hpp"
#include "support.hpp"

using namespace pide::pretty;

namespace {

// Reference formatter in the remaining-space style: `space` counts what is
// left on the current line, a block remembers the space left at its
// indentation column. Unit metric only.
class Reference {
 public:
  explicit Reference(long margin) : margin_(margin), space_(margin) {}

  std::vector<std::string> run(const Tree& t) {
    print({t}, margin_, 0, false);
    lines_.push_back(line_);
    return lines_;
  }

 private:
  long margin_;
  long space_;
  std::string line_;
  std::vector<std::string> lines_;

  static long size(const Tree& t) {
    if (auto* s = std::get_if<Str>(&t.node)) return static_cast<long>(pide::utf8::decode(s->text).size());
    if (auto* b = std::get_if<Break>(&t.node)) return b->spaces;
    long n = 0;
    for (const auto& c : std::get<Block>(t.node).body) n += size(c);
    return n;
  }
  static long dist(const std::vector<Tree>& es, std::size_t i, long after) {
    long d = 0;
    for (; i < es.size(); ++i) {
      if (std::holds_alternative<Break>(es[i].node)) return d;
      d += size(es[i]);
    }
    return d + after;
  }
  void print(const std::vector<Tree>& es, long blockspace, long after, bool force) {
    for (std::size_t i = 0; i < es.size(); ++i) {
      const Tree& e = es[i];
      const long rest = dist(es, i + 1, after);
      if (auto* s = std::get_if<Str>(&e.node)) {
        line_ += s->text;
        space_ -= size(e);
      } else if (auto* b = std::get_if<Break>(&e.node)) {
        if (force || static_cast<long>(b->spaces) + rest > space_) {
          lines_.push_back(line_);
          space_ = blockspace - static_cast<long>(b->indent);
          line_.assign(static_cast<std::size_t>(std::max(0L, margin_ - space_)), ' ');
        } else {
          line_.append(b->spaces, ' ');
          space_ -= b->spaces;
        }
      } else {
        const auto& bl = std::get<Block>(e.node);
        const bool fits = size(e) + rest <= space_;
        print(bl.body, space_ - static_cast<long>(bl.indent), rest, bl.consistent && !fits);
      }
    }
  }
};

Tree random_tree(std::mt19937_64& g, int depth, bool indents = true) {
  std::vector<Tree> body;
  const std::size_t n = 1 + test::pick(g, 6);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && test::chance(g, 0.6)) {
      body.push_back(brk(static_cast<unsigned>(1 + test::pick(g, 2)), indents ? static_cast<unsigned>(test::pick(g, 3)) : 0));
    }
    if (depth > 0 && test::chance(g, 0.3)) {
      body.push_back(random_tree(g, depth - 1, indents));
    } else {
      body.push_back(str(std::string(1 + test::pick(g, 8), static_cast<char>('a' + test::pick(g, 26)))));
    }
  }
  return block(indents ? static_cast<unsigned>(test::pick(g, 4)) : 0, std::move(body), test::chance(g, 0.5));
}

std::size_t width(const std::string& line) { return pide::utf8::decode(line).size(); }

std::string squeeze(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == ' ') continue;
    out += c;
  }
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l;
  return out;
}

// A break rendered inline shows up as a space after the line's indentation.
bool has_inline_break(const std::string& line) {
  const auto first = line.find_first_not_of(' ');
  return first != std::string::npos && line.find(' ', first) != std::string::npos;
}

}  // namespace

TEST_CASE("format examples") {
  CHECK(format(str("abc"), 80) == std::vector<std::string>{"abc"});
  const Tree four = block(2, {str("f("), brk(0, 0), str("x)")}, true);
  CHECK(format(four, 3) == std::vector<std::string>{"f(", "  x)"});
  CHECK(Reference(3).run(four) == std::vector<std::string>{"f(", "  x)"});
  CHECK(format(four, 4) == std::vector<std::string>{"f(x)"});
  CHECK_THROWS_AS(format(four, 0), std::invalid_argument);
}

TEST_CASE("unbroken examples") {
  CHECK(unbroken(str("a")) == "a");
  CHECK(unbroken(brk(2, 0)) == "  ");
  CHECK(unbroken(block(1, {str("a"), brk(), block(0, {str("b"), brk(3), str("c")})})) == "a b   c");
}

TEST_CASE("consistent and inconsistent blocks") {
  const std::vector<Tree> items{str("aaa"), brk(), str("bbb"), brk(), str("ccc")};
  CHECK(format(block(0, items, true), 8) == std::vector<std::string>{"aaa", "bbb", "ccc"});
  CHECK(format(block(0, items, false), 8) == std::vector<std::string>{"aaa bbb", "ccc"});
  CHECK(format(block(0, items, false), 11) == std::vector<std::string>{"aaa bbb ccc"});
}

TEST_CASE("proportional metric changes the breaking") {
  const Tree t = block(0, {str("mmm"), brk(), str("iii")}, false);
  CHECK(format(t, 7) == std::vector<std::string>{"mmm iii"});
  const Metric wide_m = proportional_metric({{U'm', 2.0}, {U'i', 0.5}});
  CHECK(format(t, 7, wide_m) == std::vector<std::string>{"mmm", "iii"});
  CHECK(format(t, 9, wide_m) == std::vector<std::string>{"mmm iii"});
}

TEST_CASE("agreement with the reference formatter on random trees") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto g = test::rng(seed);
    const Tree t = random_tree(g, 3);
    const long margin = 1 + static_cast<long>(test::pick(g, 40));
    CAPTURE(seed);
    CAPTURE(margin);
    CHECK(format(t, static_cast<double>(margin)) == Reference(margin).run(t));
  }
}

TEST_CASE("laws on 1000 random trees") {
  int over_margin_lines = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto g = test::rng(seed + 77);
    const Tree t = random_tree(g, 3);
    const double margin = static_cast<double>(4 + test::pick(g, 40));
    const auto lines = format(t, margin);
    CAPTURE(seed);

    // Infinite margin: one line equal to the unbroken rendering.
    CHECK(format(t, 1e6) == std::vector<std::string>{unbroken(t)});
    // Content preservation modulo break whitespace.
    CHECK(squeeze(join(lines)) == squeeze(unbroken(t)));
    // Margin law: an over-margin line holds a single unbreakable chunk.
    for (const auto& line : lines) {
      if (static_cast<double>(width(line)) > margin) {
        ++over_margin_lines;
        CHECK(!has_inline_break(line));
      }
    }
    // Halving the margin never decreases the line count.
    CHECK(format(t, margin / 2).size() >= lines.size());
  }
  CHECK(over_margin_lines > 0);
}

TEST_CASE("literal margin law on flat trees of breakable words") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto g = test::rng(seed + 9000);
    std::vector<Tree> body;
    std::vector<std::size_t> widths;
    for (std::size_t i = 0, n = 1 + test::pick(g, 12); i < n; ++i) {
      if (i > 0) body.push_back(brk());
      widths.push_back(1 + test::pick(g, 15));
      body.push_back(str(std::string(widths.back(), 'w')));
    }
    const double margin = static_cast<double>(1 + test::pick(g, 30));
    for (const auto& line : format(block(0, body, test::chance(g, 0.5)), margin)) {
      if (static_cast<double>(width(line)) > margin) {
        CHECK(std::find(widths.begin(), widths.end(), width(line)) != widths.end());
      }
    }
  }
}

TEST_CASE("validate") {
  CHECK_NOTHROW(validate(block(0, {str("a"), brk()})));
  CHECK_THROWS_AS(validate(block(0, {str("a\nb")})), std::invalid_argument);
  CHECK_THROWS_AS(validate(Tree{Str{"a", -1.0, std::nullopt}}), std::invalid_argument);
}

TEST_CASE("paragraph splits words") {
  const Tree p = paragraph("false proposition:  2 + 2 = 5");
  CHECK(unbroken(p) == "false proposition: 2 + 2 = 5");
  CHECK(format(p, 12) == std::vector<std::string>{"false", "  proposition:", "  2 + 2 = 5"});
}
