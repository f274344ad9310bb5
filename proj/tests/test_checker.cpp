#include <doctest.h>

#include <chrono>
#include <thread>

#include "pide/arith.hpp"
#include "pide/demo_checkers.hpp"
#include "support.hpp"

using namespace pide;
using test::T;

namespace {

struct Collect {
  std::vector<CheckerMessage> messages;
  MessageSink sink() {
    return [this](const CheckerMessage& m) { messages.push_back(m); };
  }
  std::vector<CheckerMessage> phase(Phase p) const {
    std::vector<CheckerMessage> out;
    for (const auto& m : messages) {
      if (m.phase == p) out.push_back(m);
    }
    return out;
  }
};

// Random arithmetic with its value computed alongside the text; only
// + - * and parentheses, so no rounding conventions are involved.
struct GenExpr {
  std::string text;
  std::int64_t value;
};

GenExpr gen_expr(std::mt19937_64& g, int depth) {
  if (depth == 0 || test::chance(g, 0.3)) {
    const auto v = static_cast<std::int64_t>(test::pick(g, 20));
    return {std::to_string(v), v};
  }
  auto a = gen_expr(g, depth - 1);
  auto b = gen_expr(g, depth - 1);
  switch (test::pick(g, 3)) {
    case 0: return {"(" + a.text + " + " + b.text + ")", a.value + b.value};
    case 1: return {"(" + a.text + " - " + b.text + ")", a.value - b.value};
    default: return {"(" + a.text + " * " + b.text + ")", a.value * b.value};
  }
}

std::string fifty_blocks(int changed = -1) {
  std::string out;
  for (int i = 0; i < 50; ++i) {
    const int rhs = i == changed ? i + 2 : i + 1;
    out += "Proposition. " + std::to_string(i) + " + 1 = " + std::to_string(rhs) + ".\n\n";
  }
  return out;
}

class Crashing final : public Checker {
 public:
  CheckOutcome check(TextView, std::stop_token, const MessageSink& emit) override {
    emit(make_message(Severity::writeln, {0, 1}, "partial"));
    throw std::runtime_error("boom");
  }
};

class OutOfBounds final : public Checker {
 public:
  CheckOutcome check(TextView content, std::stop_token, const MessageSink& emit) override {
    emit(make_message(Severity::warning, {2, content.size() + 10}, "too far"));
    return CheckOutcome::finished;
  }
};

}  // namespace

TEST_CASE("demo block checker: true and false propositions") {
  FtlChecker checker;
  const Text ok = T("Proposition. 2 + 2 = 4.");
  Collect c;
  CHECK(checker.check(ok, {}, c.sink()) == CheckOutcome::finished);
  auto sem = c.phase(Phase::semantics);
  REQUIRE(sem.size() == 1);
  CHECK(sem[0].severity == Severity::writeln);
  CHECK(sem[0].text() == "checked");
  CHECK(sem[0].range == Range{0, ok.size()});

  const Text bad = T("Axiom. x.\n\nProposition. 2 + 2 = 5.\n");
  Collect d;
  checker.check(bad, {}, d.sink());
  sem = d.phase(Phase::semantics);
  REQUIRE(sem.size() == 2);
  CHECK(sem[0].text() == "axiom assumed");
  CHECK(sem[1].severity == Severity::error);
  const Offset start = bad.find(U"Proposition");
  CHECK(sem[1].range == Range{start, start + 23});
  REQUIRE(sem[1].fix);
  CHECK(sem[1].fix->replacement == "4");
  CHECK(sem[1].fix->range == Range{bad.find(U"5"), bad.find(U"5") + 1});
}

TEST_CASE("demo block checker against generated arithmetic") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto g = test::rng(seed);
    const auto lhs = gen_expr(g, 3);
    const auto rhs = gen_expr(g, 2);
    const Text block = T("Proposition. " + lhs.text + " = " + rhs.text + ".");
    FtlChecker checker;
    Collect c;
    checker.check(block, {}, c.sink());
    auto sem = c.phase(Phase::semantics);
    CAPTURE(test::S(block));
    REQUIRE(sem.size() == 1);
    CHECK((sem[0].severity == Severity::writeln) == (lhs.value == rhs.value));
    if (lhs.value != rhs.value) {
      CHECK(sem[0].text() == "false proposition: " + std::to_string(lhs.value) + " = " +
                                 std::to_string(rhs.value) + " does not hold");
    }
  }
}

TEST_CASE("syntax messages and malformed blocks") {
  FtlChecker checker;
  Collect c;
  const Text text = T("Proposition. 1 + = 2.\n\nDefinition. a thing\n\nsome prose\n");
  checker.check(text, {}, c.sink());
  auto syn = c.phase(Phase::syntax);
  REQUIRE(syn.size() == 4);
  CHECK(syn[0].severity == Severity::status);
  CHECK(syn[1].severity == Severity::error);
  CHECK(syn[1].text().starts_with("syntax error"));
  CHECK(syn[3].text() == "block must end with \".\"");
  CHECK(c.phase(Phase::semantics).empty());
}

TEST_CASE("cache: re-check, one changed block, moved block") {
  auto cache = std::make_shared<BlockCache>();
  FtlChecker checker({0, cache});
  const Text text = T(fifty_blocks());
  Collect first;
  checker.check(text, {}, first.sink());
  CHECK(cache->evaluations() == 50);

  cache->reset_counters();
  Collect again;
  checker.check(text, {}, again.sink());
  CHECK(cache->evaluations() == 0);
  CHECK(again.messages == first.messages);

  cache->reset_counters();
  Collect edited;
  checker.check(T(fifty_blocks(17)), {}, edited.sink());
  CHECK(cache->evaluations() == 1);

  cache->reset_counters();
  const std::string original = fifty_blocks();
  const auto cut = original.find("Proposition. 3 ");
  const auto cut_end = original.find("Proposition. 4 ");
  std::string moved = original;
  const std::string block = moved.substr(cut, cut_end - cut);
  moved.erase(cut, block.size());
  moved += block;
  Collect after_move;
  checker.check(T(moved), {}, after_move.sink());
  CHECK(cache->evaluations() == 0);
}

TEST_CASE("cache soundness: cached and uncached runs agree") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto g = test::rng(seed);
    std::string doc;
    for (int i = 0, n = 1 + static_cast<int>(test::pick(g, 8)); i < n; ++i) {
      const auto e = gen_expr(g, 2);
      doc += "Proposition. " + e.text + " = " + std::to_string(e.value + static_cast<std::int64_t>(test::pick(g, 2))) + ".\n\n";
      if (test::chance(g, 0.3)) doc += doc.substr(0, doc.find("\n\n") + 2);
    }
    const Text text = T(doc);
    FtlChecker cached({0, std::make_shared<BlockCache>()});
    FtlChecker uncached({0, std::make_shared<BlockCache>(0, false)});
    Collect a, b, a2;
    cached.check(text, {}, a.sink());
    cached.check(text, {}, a2.sink());
    uncached.check(text, {}, b.sink());
    CHECK(a.messages == b.messages);
    CHECK(a2.messages == b.messages);
  }
}

TEST_CASE("cache coalesces concurrent computations of one key") {
  BlockCache cache;
  const Digest key = Digest::of(std::string_view("k"));
  std::atomic<int> computed{0};
  std::vector<std::thread> threads;
  std::vector<std::optional<BlockCache::Value>> results(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      results[static_cast<std::size_t>(i)] = cache.get_or_compute(key, [&]() -> std::optional<BlockCache::Value> {
        ++computed;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        return BlockCache::Value{make_message(Severity::writeln, {0, 1}, "v")};
      });
    });
  }
  for (auto& t : threads) t.join();
  CHECK(computed == 1);
  CHECK(cache.evaluations() == 1);
  for (const auto& r : results) {
    REQUIRE(r);
    CHECK(r->size() == 1);
  }
}

TEST_CASE("cache LRU capacity") {
  BlockCache cache(2);
  auto value = [] { return std::optional<BlockCache::Value>(BlockCache::Value{}); };
  for (const char* k : {"a", "b", "c"}) cache.get_or_compute(Digest::of(std::string_view(k)), value);
  CHECK(cache.size() == 2);
  cache.reset_counters();
  cache.get_or_compute(Digest::of(std::string_view("a")), value);
  CHECK(cache.evaluations() == 1);
  cache.get_or_compute(Digest::of(std::string_view("c")), value);
  CHECK(cache.hits() == 1);
}

TEST_CASE("streaming: syntax before semantics with a slow checker") {
  FtlChecker checker({100, std::make_shared<BlockCache>()});
  std::string doc;
  for (int i = 0; i < 3; ++i) doc += "Proposition. " + std::to_string(i) + " = " + std::to_string(i) + ".\n\n";
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  std::vector<std::pair<Phase, Clock::duration>> stamps;
  checker.check(T(doc), {}, [&](const CheckerMessage& m) { stamps.emplace_back(m.phase, Clock::now() - start); });
  REQUIRE(stamps.size() == 6);
  CHECK(stamps.front().first == Phase::syntax);
  CHECK(stamps.front().second < std::chrono::milliseconds(50));
  for (std::size_t i = 0; i < 3; ++i) CHECK(stamps[i].first == Phase::syntax);
  for (std::size_t i = 3; i < 6; ++i) CHECK(stamps[i].first == Phase::semantics);
  // Semantics arrive one by one as each block finishes.
  CHECK(stamps[4].second - stamps[3].second >= std::chrono::milliseconds(90));
}

TEST_CASE("cancellation stops the slow checker promptly") {
  FtlChecker checker({10000, std::make_shared<BlockCache>()});
  std::stop_source stop;
  std::jthread canceller([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    stop.request_stop();
  });
  const auto start = std::chrono::steady_clock::now();
  CHECK(checker.check(T("Proposition. 1 = 1."), stop.get_token(), [](const CheckerMessage&) {}) ==
        CheckOutcome::cancelled);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(2));
  CHECK(checker.cache().size() == 0);
}

TEST_CASE("registry: formats, crashes, clamping") {
  CheckerRegistry registry;
  registry.add_checker("ftl", std::make_shared<FtlChecker>());
  registry.add_checker("crash", std::make_shared<Crashing>());
  registry.add_checker("far", std::make_shared<OutOfBounds>());
  registry.register_format({"ftl", "ftl", default_theory_template});
  CHECK_THROWS_AS(registry.register_format({"ftl", "ftl", default_theory_template}), RegistryError);
  CHECK_THROWS_AS(registry.register_format({"bib", "nope", default_theory_template}), RegistryError);
  REQUIRE(registry.format_for("ftl"));
  CHECK(registry.format_for("ftl")->checker_id == "ftl");
  CHECK(registry.format_for("ftl")->theory_template("x.ftl").name == "x");
  CHECK(!registry.format_for("bib"));

  const Text content = T("some content");
  Collect crash;
  CHECK(registry.check("crash", content, {}, crash.sink()) == CheckOutcome::failed);
  REQUIRE(crash.messages.size() == 2);
  CHECK(crash.messages[1].severity == Severity::error);
  CHECK(crash.messages[1].range == Range{0, content.size()});
  CHECK(crash.messages[1].text().find("boom") != std::string::npos);

  Collect far;
  CHECK(registry.check("far", content, {}, far.sink()) == CheckOutcome::finished);
  REQUIRE(far.messages.size() == 2);
  CHECK(far.messages[0].range == Range{2, content.size()});
  CHECK(far.messages[1].text().find("malformed message position") != std::string::npos);

  Collect missing;
  CHECK(registry.check("missing", content, {}, missing.sink()) == CheckOutcome::failed);
  REQUIRE(missing.messages.size() == 1);
  CHECK(missing.messages[0].severity == Severity::error);
}

TEST_CASE("bibtex checker: per-entry diagnostics") {
  BibChecker checker;
  const Text bib = T(
      "@article{knuth84,\n  author = {Knuth},\n  title = \"Literate\",\n  year = 1984\n}\n"
      "@book{b1, title={T}, publisher={P}, year={2000}}\n"
      "@weird{w1, title={x}}\n"
      "@book{b1, title={T}, publisher={P}, year={2001}}\n"
      "@misc{broken, title = }\n");
  Collect c;
  CHECK(checker.check(bib, {}, c.sink()) == CheckOutcome::finished);
  std::vector<std::string> texts;
  for (const auto& m : c.messages) {
    if (m.severity != Severity::status) texts.push_back(m.text());
  }
  const std::vector<std::string> expected = {
      "malformed field value",
      "entry \"knuth84\" lacks required field(s): journal",
      "unknown entry type \"weird\"",
      "duplicate entry key \"b1\"",
  };
  CHECK(texts == expected);
  const Offset article = 0;
  CHECK(c.messages.back().range.begin > article);
}

TEST_CASE("external message grammar is total over its input") {
  CHECK(parse_severity("error") == Severity::error);
  CHECK(!parse_severity("fatal"));
}
