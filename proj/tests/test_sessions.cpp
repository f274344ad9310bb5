#include <doctest.h>

#include <filesystem>
#include <regex>
#include <set>
#include <thread>

#include "pide/exports.hpp"
#include "pide/sessions.hpp"
#include "support.hpp"

using namespace pide;

namespace {

NodeName thy(const std::string& name) { return NodeName::theory(name + ".thy"); }

bool imports_precede(const std::vector<NodeName>& order,
                     const std::map<NodeName, std::vector<NodeName>>& graph) {
  std::map<NodeName, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  if (pos.size() != graph.size()) return false;
  for (const auto& [node, imports] : graph) {
    for (const auto& imp : imports) {
      if (pos.contains(imp) && pos.at(imp) >= pos.at(node)) return false;
    }
  }
  return true;
}

// Glob oracle: every segment becomes "/segment", `**` any run of them.
bool regex_match_pattern(const std::string& pattern, const std::string& name) {
  std::string re;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = pattern.find('/', start);
    const std::string seg = pattern.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
    if (seg == "**") {
      re += "(/[^/]+)*";
    } else {
      re += "/";
      for (char c : seg) {
        if (c == '*') {
          re += "[^/]*";
        } else if (std::isalnum(static_cast<unsigned char>(c))) {
          re += c;
        } else {
          re += '\\';
          re += c;
        }
      }
    }
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return std::regex_match("/" + name, std::regex(re));
}

std::filesystem::path temp_db(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("pide-test-" + tag + "-" + std::to_string(::getpid()) + ".db");
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("topological order examples") {
  CHECK(topological_order({{thy("A"), {}}}) == std::vector<NodeName>{thy("A")});
  CHECK(topological_order({{thy("A"), {thy("B")}}, {thy("B"), {thy("C")}}, {thy("C"), {}}}) ==
        std::vector<NodeName>{thy("C"), thy("B"), thy("A")});
  try {
    topological_order({{thy("A"), {thy("B")}}, {thy("B"), {thy("A")}}});
    FAIL("expected CycleError");
  } catch (const CycleError& e) {
    CHECK(e.members() == std::vector<NodeName>{thy("A"), thy("B")});
    CHECK(std::string(e.what()).find("A.thy") != std::string::npos);
  }
}

TEST_CASE("topological order on random DAGs") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto g = test::rng(seed);
    const std::size_t n = 1 + test::pick(g, 12);
    std::vector<NodeName> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back(thy("T" + std::to_string(test::pick(g, 1000)) + "_" + std::to_string(i)));
    std::map<NodeName, std::vector<NodeName>> graph;
    // Edges only from later to earlier indices keep the graph acyclic.
    for (std::size_t i = 0; i < n; ++i) {
      auto& imports = graph[names[i]];
      for (std::size_t j = 0; j < i; ++j) {
        if (test::chance(g, 0.3)) imports.push_back(names[j]);
      }
      if (test::chance(g, 0.1)) imports.push_back(thy("Missing"));
    }
    const auto order = topological_order(graph);
    CAPTURE(seed);
    CHECK(imports_precede(order, graph));
    CHECK(topological_order(graph) == order);

    if (n >= 2) {
      const std::size_t a = test::pick(g, n - 1);
      graph[names[a]].push_back(names[n - 1]);
      graph[names[n - 1]].push_back(names[a]);
      CHECK_THROWS_AS(topological_order(graph), CycleError);
    }
  }
}

TEST_CASE("merge_contexts against a set-union oracle") {
  auto g = test::rng(7);
  for (int round = 0; round < 100; ++round) {
    std::vector<KeywordTable> tables(1 + test::pick(g, 4));
    std::set<std::string> commands, minor;
    for (auto& t : tables) {
      for (int i = 0; i < 4; ++i) {
        const std::string c = "c" + std::to_string(test::pick(g, 8));
        t.add_command(c);
        commands.insert(c);
        const std::string m = "m" + std::to_string(test::pick(g, 8));
        t.add_minor(m);
        minor.insert(m);
      }
    }
    const auto merged = merge_contexts(tables);
    std::set<std::string> got_commands;
    for (const auto& [name, attrs] : merged.commands()) got_commands.insert(name);
    CHECK(got_commands == commands);
    CHECK(merged.minor() == minor);
    CHECK(merge_contexts({tables[0]}) == tables[0]);
  }
  KeywordTable plain, load;
  plain.add_command("use");
  load.add_command("use", CommandAttrs{true, std::nullopt});
  try {
    merge_contexts({plain, load});
    FAIL("expected KeywordConflict");
  } catch (const KeywordConflict& e) {
    CHECK(e.command() == "use");
  }
}

TEST_CASE("node names and import resolution") {
  CHECK(canonical_path("a/./b//c/../d.thy") == "a/b/d.thy");
  CHECK_THROWS_AS(canonical_path("../x.thy"), std::invalid_argument);
  CHECK_THROWS_AS(canonical_path(""), std::invalid_argument);
  const NodeName importer = NodeName::theory("lib/sub/X.thy");
  CHECK(resolve_import(importer, "Y") == NodeName::theory("lib/sub/Y.thy"));
  CHECK(resolve_import(importer, "../Z") == NodeName::theory("lib/Z.thy"));
  CHECK(importer.stem() == "X");
  CHECK(importer.directory() == "lib/sub");
  CHECK(NodeName::file("a/b.ftl").extension() == "ftl");
}

TEST_CASE("session tree") {
  SessionTree tree;
  tree.add({"Pure", std::nullopt, {}});
  tree.add({"HOL", "Pure", {thy("Main")}});
  tree.add({"Draft", "HOL", {thy("Scratch")}});
  CHECK(tree.ancestry("Draft") == std::vector<std::string>{"Pure", "HOL", "Draft"});
  CHECK(tree.session_of(thy("Main")) == "HOL");
  CHECK(!tree.session_of(thy("Other")));
  CHECK_THROWS(tree.add({"X", "Nope", {}}));
  CHECK_THROWS(tree.add({"HOL", "Pure", {}}));
}

TEST_CASE("export names and patterns") {
  CHECK_NOTHROW(check_export_name("a/b/c.txt"));
  for (const char* bad : {"", "a//b", "/a", "a/../b", "./a", "a/"}) {
    CHECK_THROWS_AS(check_export_name(bad), ExportError);
  }
  CHECK(match_export_pattern("a/*", "a/x"));
  CHECK(!match_export_pattern("a/*", "b/z"));
  CHECK(!match_export_pattern("a/*", "a/x/y"));
  CHECK(match_export_pattern("a/**", "a/x/y"));
  CHECK(match_export_pattern("**", "a/x/y"));
  CHECK(match_export_pattern("**/y", "a/x/y"));

  const char* names[] = {"a", "b", "a/x", "a/y", "b/z", "a/x/y", "ab/c", "doc/main.tex", "doc/x/main.tex"};
  const char* patterns[] = {"*", "a/*", "**", "a/**", "**/y", "*/x", "a*", "*b/*", "doc/**/*.tex", "doc/*.tex", "**/**"};
  for (const char* p : patterns) {
    for (const char* n : names) {
      CAPTURE(p);
      CAPTURE(n);
      CHECK(match_export_pattern(p, n) == regex_match_pattern(p, n));
    }
  }
}

TEST_CASE("xz compression round trip") {
  auto g = test::rng(3);
  for (std::size_t size : {0, 1, 100, 5000, 70000}) {
    std::string data(size, '\0');
    for (auto& c : data) c = static_cast<char>(test::pick(g, 4) + 'a');
    CHECK(xz::decompress(xz::compress(data)) == data);
  }
  CHECK_THROWS_AS(xz::decompress("not xz"), ExportError);
}

TEST_CASE("export stores: round trip, compression, wildcards, duplicates") {
  MemoryExportStore memory;
  SqliteExportStore sqlite(temp_db("store"));
  for (ExportStore* store : {static_cast<ExportStore*>(&memory), static_cast<ExportStore*>(&sqlite)}) {
    const std::string zeros(1 << 20, '\0');
    store->export_blob({"S", "T", "big", zeros, true});
    CHECK(store->stored_size("S", "T", "big") < zeros.size());
    auto got = store->retrieve("S", "T", "big");
    REQUIRE(got.size() == 1);
    CHECK(got[0].payload == zeros);

    store->export_blob({"S", "T", "empty", "", false});
    store->export_blob({"S", "T", "empty_xz", "", true});
    CHECK(store->retrieve("S", "T", "empty")[0].payload.empty());
    CHECK(store->retrieve("S", "T", "empty_xz")[0].payload.empty());

    for (const char* n : {"a/x", "a/y", "b/z"}) store->export_blob({"S", "U", n, n, std::string(n) == "a/y"});
    auto matched = store->retrieve("S", "U", "a/*");
    REQUIRE(matched.size() == 2);
    CHECK(matched[0].name == "a/x");
    CHECK(matched[1].name == "a/y");
    CHECK(matched[1].payload == "a/y");
    CHECK(store->retrieve("S", "*", "**").size() == 6);
    CHECK(store->retrieve("Other", "*", "**").empty());
    CHECK(store->retrieve("S", "T", "nothing").empty());

    CHECK_THROWS_AS(store->export_blob({"S", "U", "a/x", "again", false}), ExportError);
    CHECK(store->retrieve("S", "U", "a/x")[0].payload == "a/x");
    CHECK_THROWS_AS(store->export_blob({"S", "U", "../bad", "", false}), ExportError);
    CHECK(store->list("S").size() == 6);
  }
}

TEST_CASE("sqlite store persists and concurrent writers are first-wins") {
  const auto path = temp_db("persist");
  {
    SqliteExportStore store(path);
    std::vector<std::thread> writers;
    std::atomic<int> failures{0};
    for (int w = 0; w < 4; ++w) {
      writers.emplace_back([&, w] {
        for (int i = 0; i < 20; ++i) {
          try {
            store.export_blob({"S", "T", "e" + std::to_string(i), "w" + std::to_string(w), i % 2 == 0});
          } catch (const ExportError&) {
            ++failures;
          }
        }
      });
    }
    for (auto& t : writers) t.join();
    CHECK(failures == 60);
  }
  SqliteExportStore reopened(path);
  CHECK(reopened.list("S").size() == 20);
  reopened.clear_session("S");
  CHECK(reopened.list("S").empty());
  std::filesystem::remove(path);
}
