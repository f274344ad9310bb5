#include <doctest.h>

#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "pide/demo_checkers.hpp"
#include "pide/protocol.hpp"
#include "pide/server.hpp"
#include "incremental.hpp"
#include "support.hpp"

using namespace pide;
using namespace pide::protocol;
using test::S;
using test::T;
using namespace std::chrono_literals;

namespace {

// Reference framing written from the format description alone.
std::string reference_encode(const std::vector<std::string>& chunks) {
  std::ostringstream header;
  std::string payload;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    header << (i ? "," : "") << chunks[i].size();
    payload += chunks[i];
  }
  return header.str() + "\n" + payload;
}

std::vector<std::vector<std::string>> reference_decode(const std::string& bytes) {
  std::vector<std::vector<std::string>> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    std::istringstream header(bytes.substr(pos, nl - pos));
    std::vector<std::string> chunks;
    std::vector<std::size_t> lengths;
    for (std::string field; std::getline(header, field, ',');) lengths.push_back(std::stoul(field));
    pos = nl + 1;
    for (auto n : lengths) {
      chunks.push_back(bytes.substr(pos, n));
      pos += n;
    }
    out.push_back(std::move(chunks));
  }
  return out;
}

std::string random_bytes(std::mt19937_64& g, std::size_t n) {
  std::string s(n, '\0');
  for (auto& c : s) c = static_cast<char>(test::pick(g, 256));
  return s;
}

Message random_message(std::mt19937_64& g) {
  Message m;
  const std::size_t chunks = 1 + test::pick(g, 10);
  for (std::size_t i = 0; i < chunks; ++i) {
    const std::size_t len = test::chance(g, 0.2) ? 0 : test::pick(g, 1025);
    m.chunks.push_back(i == 0 ? "m" + std::to_string(test::pick(g, 100)) : random_bytes(g, len));
  }
  return m;
}

std::vector<Message> decode_all(Decoder& d) {
  std::vector<Message> out;
  while (auto m = d.next()) out.push_back(std::move(*m));
  return out;
}

std::string random_plain(std::mt19937_64& g, std::size_t max) {
  static const std::string alphabet = "abc =<>&\"\n\t\x01\x7f\xc3\xa9";
  std::string s;
  for (std::size_t i = 0, n = test::pick(g, max + 1); i < n; ++i) s += alphabet[test::pick(g, alphabet.size())];
  return s;
}

// Bodies without empty or adjacent texts, the normal form parse produces.
yxml::Body random_body(std::mt19937_64& g, int depth) {
  yxml::Body body;
  bool last_text = false;
  for (std::size_t i = 0, n = test::pick(g, 4); i < n; ++i) {
    if (!last_text && test::chance(g, 0.4)) {
      std::string s = random_plain(g, 8);
      if (s.empty()) s = "x";
      body.push_back(yxml::text(std::move(s)));
      last_text = true;
      continue;
    }
    yxml::Attributes attrs;
    for (std::size_t k = 0, m = test::pick(g, 3); k < m; ++k) {
      attrs.emplace_back("k" + std::to_string(k), random_plain(g, 5));
    }
    body.push_back(yxml::elem("e" + std::to_string(test::pick(g, 3)), std::move(attrs),
                              depth > 0 ? random_body(g, depth - 1) : yxml::Body{}));
    last_text = false;
  }
  return body;
}

pretty::Tree random_pretty(std::mt19937_64& g, int depth) {
  switch (depth == 0 ? test::pick(g, 2) : test::pick(g, 3)) {
    case 0: {
      pretty::Str s{random_plain(g, 6), std::nullopt, std::nullopt};
      std::erase(s.text, '\n');
      if (test::chance(g, 0.3)) s.width = static_cast<double>(test::pick(g, 100)) / 8;
      if (test::chance(g, 0.3)) s.markup = MarkupElement("entity", {{"kind", "constant"}});
      return pretty::Tree{s};
    }
    case 1: return pretty::brk(static_cast<unsigned>(test::pick(g, 3)), static_cast<unsigned>(test::pick(g, 3)));
    default: {
      std::vector<pretty::Tree> body;
      for (std::size_t i = 0, n = test::pick(g, 4); i < n; ++i) body.push_back(random_pretty(g, depth - 1));
      return pretty::block(static_cast<unsigned>(test::pick(g, 4)), std::move(body), test::chance(g, 0.5));
    }
  }
}

std::vector<NodeEdit> random_edits(std::mt19937_64& g) {
  std::vector<NodeEdit> edits;
  for (std::size_t i = 0, n = test::pick(g, 5); i < n; ++i) {
    const NodeName node = test::chance(g, 0.5) ? NodeName::theory("T" + std::to_string(test::pick(g, 2)) + ".thy")
                                               : NodeName::file("d/doc.ftl");
    Text text = T(random_plain(g, 12) + "‹αβ›");
    switch (test::pick(g, 4)) {
      case 0: edits.push_back({node, edit::Insert{test::pick(g, 50), text}}); break;
      case 1: edits.push_back({node, edit::Remove{test::pick(g, 50), text}}); break;
      case 2: edits.push_back({node, edit::SetNode{test::chance(g, 0.2) ? Text() : text}}); break;
      default: {
        edit::Perspective p{{}, test::chance(g, 0.5)};
        for (std::size_t k = 0, m = test::pick(g, 3); k < m; ++k) p.visible.push_back({k * 10, k * 10 + 5});
        edits.push_back({node, p});
      }
    }
  }
  return edits;
}

// Server output collected from any thread.
struct Collector {
  std::mutex mutex;
  std::condition_variable cv;
  std::vector<Message> messages;

  Session::Output output() {
    return [this](Message m) {
      {
        std::lock_guard lock(mutex);
        messages.push_back(std::move(m));
      }
      cv.notify_all();
    };
  }

  std::vector<Message> snapshot() {
    std::lock_guard lock(mutex);
    return messages;
  }

  template <class Pred>
  bool wait(Pred pred, std::chrono::milliseconds timeout = 10s) {
    std::unique_lock lock(mutex);
    return cv.wait_for(lock, timeout, [&] { return pred(messages); });
  }
};

std::shared_ptr<const CheckerRegistry> registry() { return test::demo_registry(); }

DocumentState::Options options(unsigned workers = 2) {
  DocumentState::Options o;
  o.engine.workers = workers;
  o.engine.cancel_deadline = 500ms;
  return o;
}

std::vector<NodeEdit> document(const NodeName& node, const std::string& text) {
  return {{node, edit::SetNode{T(text)}}, {node, edit::Perspective{{}, true}}};
}

std::size_t count_named(const std::vector<Message>& ms, std::string_view name) {
  return static_cast<std::size_t>(
      std::count_if(ms.begin(), ms.end(), [&](const Message& m) { return m.name() == name; }));
}

std::vector<std::string> protocol_errors(const std::vector<Message>& ms) {
  std::vector<std::string> out;
  for (const auto& m : ms) {
    if (m.name() == "report" && m.arg(0) == "0") out.push_back(decode_report(yxml::parse(m.arg(1))).message.text());
  }
  return out;
}

// Wire invariants: `assigned` introduces an exec id before any event for
// it; statuses follow unprocessed -> running -> terminal (or straight to
// cancelled) without repeats; nothing follows a terminal status. Returns
// the first violation.
std::optional<std::string> check_ordering(const std::vector<Message>& ms) {
  std::set<ExecId> introduced;
  std::map<ExecId, ExecStatus> last;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto& m = ms[i];
    const std::string at = " at message " + std::to_string(i);
    if (m.name() == "assigned") {
      for (const auto& [node, spans] : decode_assignment(yxml::parse(m.arg(1)))) {
        for (const auto& s : spans) introduced.insert(s.exec);
      }
    } else if (m.name() == "status" || m.name() == "report") {
      const ExecId id = parse_number(m.arg(0), "exec");
      if (id == 0) continue;
      if (!introduced.contains(id)) return "exec " + m.arg(0) + " not assigned before " + m.name() + at;
      const ExecStatus prev = last.contains(id) ? last[id] : ExecStatus::unprocessed;
      if (is_terminal(prev)) return "event after terminal status of " + m.arg(0) + at;
      if (m.name() == "status") {
        const auto s = parse_exec_status(m.arg(1));
        if (!s) return "bad status " + m.arg(1);
        const bool legal = (prev == ExecStatus::unprocessed && (*s == ExecStatus::running || *s == ExecStatus::cancelled)) ||
                           (prev == ExecStatus::running && is_terminal(*s));
        if (!legal) return "illegal transition " + std::string(to_string(prev)) + " -> " + m.arg(1) + at;
        last[id] = *s;
      } else if (prev != ExecStatus::running) {
        return "report for exec " + m.arg(0) + " while " + std::string(to_string(prev)) + at;
      }
    }
  }
  return std::nullopt;
}

// Exec ids from all `assigned` messages lacking a terminal status.
std::set<ExecId> unfinished(const std::vector<Message>& ms) {
  std::set<ExecId> open;
  for (const auto& m : ms) {
    if (m.name() == "assigned") {
      for (const auto& [node, spans] : decode_assignment(yxml::parse(m.arg(1)))) {
        for (const auto& s : spans) open.insert(s.exec);
      }
    }
  }
  for (const auto& m : ms) {
    if (m.name() == "status" && is_terminal(*parse_exec_status(m.arg(1)))) open.erase(parse_number(m.arg(0), "exec"));
  }
  return open;
}

}  // namespace

TEST_CASE("framing examples") {
  CHECK(encode(Message("ping")) == "4\nping");
  const std::string e = encode(Message("edits", {"abc", "def"}));
  CHECK(e.substr(0, 6) == "5,3,3\n");
  CHECK(e.size() == 6 + 11);
  CHECK(encode(Message("x", {""})) == "1,0\nx");
  CHECK_THROWS_AS(encode(Message()), std::invalid_argument);
}

TEST_CASE("framing round trip under random chunking") {
  auto g = test::rng(7);
  std::vector<Message> sent;
  std::string stream;
  for (int i = 0; i < 10000; ++i) {
    sent.push_back(random_message(g));
    const std::string bytes = encode(sent.back());
    REQUIRE(bytes == reference_encode(sent.back().chunks));
    stream += bytes;
  }
  const auto reference = reference_decode(stream);
  REQUIRE(reference.size() == sent.size());
  for (std::size_t i = 0; i < sent.size(); ++i) REQUIRE(reference[i] == sent[i].chunks);

  Decoder d;
  std::vector<Message> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t n = std::min(stream.size() - pos, test::chance(g, 0.3) ? 1 + test::pick(g, 3) : 1 + test::pick(g, 4096));
    d.feed(std::string_view(stream).substr(pos, n));
    pos += n;
    for (auto& m : decode_all(d)) got.push_back(std::move(m));
  }
  CHECK(d.idle());
  REQUIRE(got.size() == sent.size());
  for (std::size_t i = 0; i < sent.size(); ++i) REQUIRE(got[i] == sent[i]);
}

TEST_CASE("framing: truncated input waits, malformed headers are fatal") {
  Decoder d;
  d.feed("5,3");
  CHECK(!d.next());
  d.feed(",3\nedits");
  CHECK(!d.next());
  CHECK(!d.idle());
  d.feed("abcde");
  CHECK(!d.next());
  d.feed("f");
  const auto m = d.next();
  REQUIRE(m);
  CHECK(*m == Message("edits", {"abc", "def"}));
  CHECK(d.idle());

  for (const std::string bad : {"4x\nping", ",4\n", "4,\n", "4,,1\n", "\n", "-1\n", "99999999999999\n"}) {
    CAPTURE(bad);
    Decoder e;
    CHECK_THROWS_AS(e.feed(bad), ProtocolError);
    CHECK(e.failed());
    CHECK_THROWS_AS(e.feed("4\nping"), ProtocolError);
  }
  // Rejected before the newline arrives.
  Decoder early;
  CHECK_THROWS_AS(early.feed("GET / HTTP/1.1"), ProtocolError);
  Decoder endless;
  CHECK_THROWS_AS(endless.feed(std::string(Decoder::max_header + 1, '1') + ","), ProtocolError);
}

TEST_CASE("tree serialization") {
  using namespace yxml;
  const Body b{elem("a", {{"k", "v"}}, {text("hi"), elem("b")}), text("tail")};
  const std::string bytes = encode(b);
  CHECK(bytes == std::string("\x05\x06" "a\x06k=v\x05hi\x05\x06" "b\x05\x05\x06\x05\x05\x06\x05tail"));
  CHECK(parse(bytes) == b);
  CHECK(parse("x" + encode({text("y")})) == Body{text("xy")});
  CHECK(parse("") == Body{});

  CHECK_THROWS_AS(encode({text("a\x05")}), std::invalid_argument);
  CHECK_THROWS_AS(encode({elem("")}), std::invalid_argument);
  CHECK_THROWS_AS(encode({elem("a", {{"k=", "v"}})}), std::invalid_argument);
  for (const std::string bad : {"\x05", "\x05x", "\x05\x06" "a", "\x05\x06" "a\x05", "\x05\x06\x05", "a\x06",
                                "\x05\x06" "a\x06novalue\x05\x05\x06\x05"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse(bad), ProtocolError);
  }

  auto g = test::rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Body body = random_body(g, 3);
    REQUIRE(parse(encode(body)) == body);
  }
}

TEST_CASE("payload codecs round trip") {
  auto g = test::rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto edits = random_edits(g);
    const auto back = decode_edits(yxml::parse(yxml::encode(encode_edits(edits))));
    REQUIRE(back.size() == edits.size());
    for (std::size_t k = 0; k < edits.size(); ++k) {
      REQUIRE(back[k].first == edits[k].first);
      REQUIRE(back[k].second.index() == edits[k].second.index());
    }
    REQUIRE(yxml::encode(encode_edits(back)) == yxml::encode(encode_edits(edits)));

    const auto tree = random_pretty(g, 3);
    REQUIRE(decode_pretty(yxml::parse(yxml::encode(encode_pretty(tree)))) == tree);

    Report r;
    if (test::chance(g, 0.7)) r.node = NodeName::theory("A.thy");
    r.message.severity = static_cast<Severity>(test::pick(g, 4));
    r.message.phase = test::chance(g, 0.5) ? Phase::syntax : Phase::semantics;
    r.message.range = {test::pick(g, 10), 10 + test::pick(g, 10)};
    r.message.body = tree;
    if (test::chance(g, 0.5)) r.message.fix = ActiveFix{{3, 4}, random_plain(g, 3), "fix it"};
    REQUIRE(decode_report(yxml::parse(yxml::encode(encode_report(r)))) == r);
  }

  Assignment a;
  a.nodes[NodeName::theory("A.thy")] = {{1, 10, {0, 5}}, {2, 11, {5, 9}}};
  a.nodes[NodeName::file("x.ftl")] = {{3, 12, {0, 4}}};
  CHECK(decode_assignment(yxml::parse(yxml::encode(encode_assignment(a)))) == a.nodes);

  CHECK_THROWS_AS(decode_edits(yxml::parse(yxml::encode({yxml::elem("node", {{"kind", "theory"}, {"path", "../x"}})}))),
                  ProtocolError);
  CHECK_THROWS_AS(decode_edits({yxml::elem("node", {{"kind", "theory"}, {"path", "A.thy"}}, {yxml::elem("zap")})}),
                  ProtocolError);
  CHECK_THROWS_AS(decode_edits({yxml::elem("node", {{"kind", "theory"}, {"path", "A.thy"}},
                                           {yxml::elem("insert", {{"offset", "x"}})})}),
                  ProtocolError);
}

TEST_CASE("session: start, empty edits, unknown messages") {
  Collector out;
  Session session(registry(), options(), out.output());
  session.handle(Message("node_edits", {"", ""}));
  CHECK(protocol_errors(out.snapshot()) == std::vector<std::string>{"message \"node_edits\": no session started"});

  session.handle(msg::session_start());
  CHECK(session.started());
  session.handle(msg::node_edits(std::nullopt, {}));
  auto ms = out.snapshot();
  REQUIRE(ms.size() == 2);
  CHECK(ms[1].name() == "assigned");
  CHECK(decode_assignment(yxml::parse(ms[1].arg(1))).empty());

  session.handle(Message("nope", {"x"}));
  ms = out.snapshot();
  REQUIRE(ms.size() == 3);
  CHECK(ms[2].name() == "report");
  CHECK(ms[2].arg(0) == "0");
  const auto err = decode_report(yxml::parse(ms[2].arg(1)));
  CHECK(err.message.severity == Severity::error);
  CHECK(!err.node);
  CHECK(err.message.text() == "unknown message \"nope\"");

  session.handle(msg::session_start());
  session.handle(Message("node_edits", {"1"}));
  session.handle(Message("node_edits", {"x", ""}));
  session.handle(Message("node_edits", {"", "\x05"}));
  session.handle(msg::dialog_result("7", "ok"));
  const auto errors = protocol_errors(out.snapshot());
  REQUIRE(errors.size() == 7);
  CHECK(errors[2] == "message \"session_start\": session already started");
  CHECK(errors[3] == "message \"node_edits\": expects 2 arguments, got 1");
  CHECK(errors[4] == "message \"node_edits\": bad version id: \"x\"");
  CHECK(errors[5].starts_with("message \"node_edits\": "));
  CHECK(errors[6] == "message \"dialog_result\": no dialog \"7\" is open");
  // Still alive.
  session.handle(msg::node_edits(std::nullopt, {}));
  CHECK(out.snapshot().back().name() == "assigned");
  CHECK(protocol_errors(out.snapshot()).size() == 7);
}

TEST_CASE("session: a two-command document") {
  Collector out;
  Session session(registry(), options(), out.output());
  session.handle(msg::session_start());
  const NodeName a = NodeName::theory("A.thy");
  const std::string text = "definition c = \"2\"\nlemma \"c + 1 = 4\"\n";
  session.handle(msg::node_edits(5, document(a, text)));
  auto first = out.snapshot().front();
  REQUIRE(first.name() == "assigned");
  CHECK(first.arg(0) == "5");
  const auto spans = decode_assignment(yxml::parse(first.arg(1))).at(a);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].exec != spans[1].exec);

  REQUIRE(out.wait([&](const auto& ms) { return unfinished(ms).empty(); }));
  const auto ms = out.snapshot();
  CHECK(check_ordering(ms) == std::nullopt);
  for (const auto& s : spans) {
    std::vector<std::string> states;
    for (const auto& m : ms) {
      if (m.name() == "status" && m.arg(0) == std::to_string(s.exec)) states.push_back(m.arg(1));
    }
    CHECK(states == std::vector<std::string>{"running", "finished"});
  }
  // The false lemma is reported on its claim, in node offsets.
  std::optional<Report> lemma;
  for (const auto& m : ms) {
    if (m.name() != "report" || m.arg(0) != std::to_string(spans[1].exec)) continue;
    auto r = decode_report(yxml::parse(m.arg(1)));
    if (r.message.severity == Severity::error) lemma = r;
  }
  REQUIRE(lemma);
  CHECK(lemma->node == a);
  const Offset claim = T(text).find(U"\"c + 1 = 4\"");
  CHECK(lemma->message.range == Range{claim, claim + 11});
  REQUIRE(lemma->message.fix);
  CHECK(lemma->message.fix->replacement == "3");

  // Re-proposing the version is idempotent; a stale edit is reported.
  session.handle(msg::node_edits(5, document(a, text)));
  CHECK(out.snapshot().back().name() == "assigned");
  session.handle(msg::node_edits(std::nullopt, {{a, edit::Remove{0, T("lemma")}}}));
  const auto errors = protocol_errors(out.snapshot());
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].starts_with("message \"node_edits\": "));
}

TEST_CASE("session: blob updates check auxiliary files") {
  Collector out;
  Session session(registry(), options(), out.output());
  session.handle(msg::session_start("Demo"));
  session.handle(msg::node_edits(std::nullopt, {{NodeName::file("doc.ftl"), edit::Perspective{{}, true}}}));
  session.handle(msg::blob_update(std::nullopt, "./doc.ftl", "Proposition. 2 + 2 = 5.\n"));
  REQUIRE(out.wait([&](const auto& ms) { return count_named(ms, "assigned") == 2 && unfinished(ms).empty(); }));
  const auto ms = out.snapshot();
  CHECK(check_ordering(ms) == std::nullopt);
  bool error = false;
  for (const auto& m : ms) {
    if (m.name() == "report" && m.arg(0) != "0") {
      const auto r = decode_report(yxml::parse(m.arg(1)));
      if (r.message.severity == Severity::error && r.node == NodeName::file("doc.ftl")) error = true;
    }
  }
  CHECK(error);
  CHECK(session.state()->engine().options().session == "Demo");
}

TEST_CASE("session: ordering and liveness over random edit sequences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    auto g = test::rng(seed);
    Collector out;
    {
      Session session(registry(), options(3), out.output());
      session.handle(msg::session_start());
      const NodeName a = NodeName::theory("A.thy");
      const NodeName b = NodeName::theory("B.thy");
      Text ta = T("theory A begin\n");
      Text tb = T("theory B imports A begin\n");
      std::vector<NodeEdit> initial = document(a, S(ta));
      for (auto& e : document(b, S(tb))) initial.push_back(e);
      session.handle(msg::node_edits(std::nullopt, initial));
      for (std::size_t batch = 0, n = 1 + test::pick(g, 12); batch < n; ++batch) {
        const bool on_a = test::chance(g, 0.5);
        Text& t = on_a ? ta : tb;
        Text cmd = T(test::random_command(g));
        if (test::chance(g, 0.2)) cmd = T("ML ‹sleep 200›\n");
        if (test::chance(g, 0.7) || t.size() < 20) {
          session.handle(msg::node_edits(std::nullopt, {{on_a ? a : b, edit::Insert{t.size(), cmd}}}));
          t += cmd;
        } else {
          const Offset at = t.find(U'\n') + 1;
          const Offset len = std::min<Offset>(t.size() - at, 1 + test::pick(g, 10));
          session.handle(msg::node_edits(std::nullopt, {{on_a ? a : b, edit::Remove{at, t.substr(at, len)}}}));
          t.erase(at, len);
        }
        if (test::chance(g, 0.5)) std::this_thread::sleep_for(std::chrono::milliseconds(test::pick(g, 30)));
      }
      REQUIRE(session.state()->await_quiescence(20s));
      const bool live = out.wait([&](const auto& ms) { return unfinished(ms).empty(); }, 5s);
      const auto ms = out.snapshot();
      CHECK_MESSAGE(live, unfinished(ms).size() << " exec ids without terminal status");
      const auto violation = check_ordering(ms);
      CHECK_MESSAGE(!violation, violation.value_or(""));
      CHECK(protocol_errors(ms).empty());
    }
  }
}

TEST_CASE("transport: serve over a socket pair") {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) == 0);
  ServeOptions o{registry(), options(), nullptr};
  auto served = std::async(std::launch::async, [&] { return serve(fds[0], fds[0], o); });
  Client client(fds[1]);
  client.send(msg::session_start());
  client.send(msg::node_edits(std::nullopt, document(NodeName::theory("A.thy"), "definition c = \"1\"\n")));
  const auto m = client.receive(5s);
  REQUIRE(m);
  CHECK(m->name() == "assigned");
  client.finish();
  REQUIRE(served.wait_for(5s) == std::future_status::ready);
  CHECK(served.get() == ServeEnd::eof);
  ::close(fds[0]);
  while (client.receive(5s)) {
  }
  CHECK(client.at_eof());
}

TEST_CASE("transport: malformed framing reports and closes") {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) == 0);
  ServeOptions o{registry(), options(), nullptr};
  auto served = std::async(std::launch::async, [&] { return serve(fds[0], fds[0], o); });
  Client client(fds[1]);
  REQUIRE(write_all(fds[1], "12,x\n"));
  const auto m = client.receive(5s);
  REQUIRE(m);
  CHECK(m->name() == "report");
  CHECK(decode_report(yxml::parse(m->arg(1))).message.text().starts_with("malformed message header"));
  REQUIRE(served.wait_for(5s) == std::future_status::ready);
  CHECK(served.get() == ServeEnd::protocol_error);
  ::close(fds[0]);
}

TEST_CASE("transport: unix socket and interruption during checking") {
  const auto dir = std::filesystem::temp_directory_path() / ("pide-proto-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "s").string();
  WakePipe wake;
  const int listener = listen_unix(path);
  ServeOptions o{registry(), options(), &wake};
  auto served = std::async(std::launch::async, [&] {
    const int fd = accept_one(listener, &wake);
    const ServeEnd end = serve(fd, fd, o);
    ::close(fd);
    return end;
  });
  Client client = Client::connect_unix(path);
  client.send(msg::session_start());
  client.send(msg::node_edits(std::nullopt, document(NodeName::theory("A.thy"), "ML ‹sleep 60000›\n")));
  bool running = false;
  while (auto m = client.receive(5s)) {
    if (m->name() == "status" && m->arg(1) == "running") {
      running = true;
      break;
    }
  }
  REQUIRE(running);
  const auto start = std::chrono::steady_clock::now();
  wake.signal();
  REQUIRE(served.wait_for(5s) == std::future_status::ready);
  CHECK(served.get() == ServeEnd::interrupted);
  CHECK(std::chrono::steady_clock::now() - start < 2s);
  ::close(listener);

  // Nobody connecting: the wake pipe ends the accept.
  const int idle = listen_unix(path + "2");
  CHECK(accept_one(idle, &wake) == -1);
  ::close(idle);
  std::filesystem::remove_all(dir);
}

TEST_CASE("protocol trace") {
  const auto file = std::filesystem::temp_directory_path() / ("pide-trace-" + std::to_string(::getpid()));
  {
    Trace off("");
    CHECK(!off.enabled());
    Trace trace(file.c_str());
    REQUIRE(trace.enabled());
    trace.log('<', Message("node_edits", {"", "abc"}));
    trace.log('>', Message("status", {"1", "running"}));
  }
  std::ifstream in(file);
  std::stringstream s;
  s << in.rdbuf();
  CHECK(s.str() == "< node_edits [0,3]\n> status [1,7]\n");
  std::filesystem::remove(file);
}
