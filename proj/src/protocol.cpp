#include "pide/protocol.hpp"

#include <charconv>
#include <limits>

namespace pide::protocol {

Message::Message(std::string name, std::vector<std::string> args) {
  chunks.reserve(args.size() + 1);
  chunks.push_back(std::move(name));
  for (auto& a : args) chunks.push_back(std::move(a));
}

std::string encode(const Message& message) {
  if (message.chunks.empty()) throw std::invalid_argument("message without chunks");
  std::string out;
  std::size_t total = 0;
  for (std::size_t i = 0; i < message.chunks.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(message.chunks[i].size());
    total += message.chunks[i].size();
  }
  out += '\n';
  out.reserve(out.size() + total);
  for (const auto& c : message.chunks) out += c;
  return out;
}

void Decoder::fail(const std::string& what) {
  failed_ = true;
  throw ProtocolError("malformed message header: " + what);
}

void Decoder::feed(std::string_view bytes) {
  if (failed_) throw ProtocolError("decoder failed earlier");
  buffer_.append(bytes);
  parse();
}

void Decoder::parse() {
  while (true) {
    if (!lengths_) {
      // Validate as we go so that garbage is rejected before its newline.
      const std::size_t nl = buffer_.find('\n', pos_);
      const std::size_t end = nl == std::string::npos ? buffer_.size() : nl;
      std::vector<std::size_t> lengths;
      std::size_t value = 0;
      bool digits = false;
      for (std::size_t i = pos_; i < end; ++i) {
        const char c = buffer_[i];
        if (c >= '0' && c <= '9') {
          value = value * 10 + static_cast<std::size_t>(c - '0');
          if (value > max_chunk) fail("chunk length exceeds " + std::to_string(max_chunk));
          digits = true;
        } else if (c == ',') {
          if (!digits) fail("empty chunk length");
          lengths.push_back(value);
          value = 0;
          digits = false;
        } else {
          fail("unexpected byte " + std::to_string(static_cast<unsigned char>(c)));
        }
      }
      if (end - pos_ > max_header) fail("header longer than " + std::to_string(max_header) + " bytes");
      if (nl == std::string::npos) break;
      if (!digits) fail(lengths.empty() && end == pos_ ? "empty header" : "empty chunk length");
      lengths.push_back(value);
      lengths_ = std::move(lengths);
      pos_ = nl + 1;
    }
    std::size_t total = 0;
    for (std::size_t n : *lengths_) total += n;
    if (buffer_.size() - pos_ < total) break;
    Message m;
    m.chunks.reserve(lengths_->size());
    for (std::size_t n : *lengths_) {
      m.chunks.push_back(buffer_.substr(pos_, n));
      pos_ += n;
    }
    ready_.push_back(std::move(m));
    lengths_.reset();
  }
  if (pos_ > 0 && pos_ * 2 >= buffer_.size()) {
    buffer_.erase(0, pos_);
    pos_ = 0;
  }
}

std::optional<Message> Decoder::next() {
  if (ready_.empty()) return std::nullopt;
  Message m = std::move(ready_.front());
  ready_.pop_front();
  return m;
}

std::uint64_t parse_number(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ProtocolError("bad " + std::string(what) + ": \"" + yxml::clean(s) + "\"");
  }
  return v;
}

namespace yxml {

const std::string* Element::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

Tree elem(std::string name, Attributes attributes, Body body) {
  return Tree{Element{std::move(name), std::move(attributes), std::move(body)}};
}

Tree text(std::string text) { return Tree{std::move(text)}; }

std::string clean(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c == X || c == Y) c = '?';
  }
  return out;
}

namespace {

void check_plain(std::string_view s, const char* what) {
  if (s.find(X) != std::string_view::npos || s.find(Y) != std::string_view::npos) {
    throw std::invalid_argument(std::string("control byte in ") + what);
  }
}

void encode_into(const Body& body, std::string& out) {
  for (const auto& t : body) {
    if (const auto* s = std::get_if<std::string>(&t.node)) {
      check_plain(*s, "text");
      out += *s;
      continue;
    }
    const auto& e = std::get<Element>(t.node);
    if (e.name.empty()) throw std::invalid_argument("empty element name");
    check_plain(e.name, "element name");
    out += X;
    out += Y;
    out += e.name;
    for (const auto& [k, v] : e.attributes) {
      check_plain(k, "attribute key");
      check_plain(v, "attribute value");
      if (k.empty() || k.find('=') != std::string::npos) throw std::invalid_argument("bad attribute key \"" + k + "\"");
      out += Y;
      out += k;
      out += '=';
      out += v;
    }
    out += X;
    encode_into(e.body, out);
    out += X;
    out += Y;
    out += X;
  }
}

}  // namespace

std::string encode(const Body& body) {
  std::string out;
  encode_into(body, out);
  return out;
}

Body parse(std::string_view bytes) {
  std::vector<Element> stack(1);
  auto append_text = [&](std::string_view s) {
    if (s.empty()) return;
    auto& body = stack.back().body;
    if (!body.empty()) {
      if (auto* prev = std::get_if<std::string>(&body.back().node)) {
        prev->append(s);
        return;
      }
    }
    body.push_back(text(std::string(s)));
  };
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes[pos] != X) {
      std::size_t end = bytes.find(X, pos);
      if (end == std::string_view::npos) end = bytes.size();
      const auto piece = bytes.substr(pos, end - pos);
      if (piece.find(Y) != std::string_view::npos) throw ProtocolError("stray Y byte in text");
      append_text(piece);
      pos = end;
      continue;
    }
    if (pos + 1 >= bytes.size() || bytes[pos + 1] != Y) throw ProtocolError("X byte not followed by Y");
    const std::size_t end = bytes.find(X, pos + 2);
    if (end == std::string_view::npos) throw ProtocolError("unterminated markup");
    const auto tag = bytes.substr(pos + 2, end - pos - 2);
    pos = end + 1;
    if (tag.empty()) {
      if (stack.size() == 1) throw ProtocolError("unbalanced close");
      Element done = std::move(stack.back());
      stack.pop_back();
      stack.back().body.push_back(Tree{std::move(done)});
      continue;
    }
    Element e;
    std::size_t i = 0;
    while (i <= tag.size()) {
      std::size_t j = tag.find(Y, i);
      if (j == std::string_view::npos) j = tag.size();
      const auto field = tag.substr(i, j - i);
      if (i == 0) {
        if (field.empty()) throw ProtocolError("empty element name");
        e.name = std::string(field);
      } else {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos || eq == 0) throw ProtocolError("bad attribute \"" + std::string(field) + "\"");
        e.attributes.emplace_back(std::string(field.substr(0, eq)), std::string(field.substr(eq + 1)));
      }
      i = j + 1;
    }
    stack.push_back(std::move(e));
  }
  if (stack.size() != 1) throw ProtocolError("unclosed element \"" + stack.back().name + "\"");
  return std::move(stack.front().body);
}

}  // namespace yxml

namespace {

using yxml::Body;
using yxml::Element;

std::string num(std::uint64_t v) { return std::to_string(v); }

const std::string& attr(const Element& e, std::string_view key) {
  if (const auto* v = e.attribute(key)) return *v;
  throw ProtocolError("element \"" + e.name + "\" lacks attribute \"" + std::string(key) + "\"");
}

std::uint64_t num_attr(const Element& e, std::string_view key) { return parse_number(attr(e, key), key); }

const Element& as_element(const yxml::Tree& t, std::string_view context) {
  if (const auto* e = std::get_if<Element>(&t.node)) return *e;
  throw ProtocolError("unexpected text in " + std::string(context));
}

std::string body_text(const Element& e) {
  std::string out;
  for (const auto& t : e.body) {
    const auto* s = std::get_if<std::string>(&t.node);
    if (!s) throw ProtocolError("element \"" + e.name + "\" must contain only text");
    out += *s;
  }
  return out;
}

std::string utf8_text(const Text& t) { return utf8::encode(t); }

Body text_body(const Text& t) {
  std::string s = utf8_text(t);
  if (s.empty()) return {};
  return {yxml::text(std::move(s))};
}

yxml::Attributes node_attributes(const NodeName& n) {
  return {{"kind", to_string(n.kind)}, {"path", n.path}};
}

NodeName node_of(const Element& e) {
  const auto& kind = attr(e, "kind");
  try {
    if (kind == "theory") return NodeName::theory(attr(e, "path"));
    if (kind == "file") return NodeName::file(attr(e, "path"));
  } catch (const std::invalid_argument& ex) {
    throw ProtocolError(ex.what());
  }
  throw ProtocolError("bad node kind \"" + kind + "\"");
}

bool bool_attr(const Element& e, std::string_view key) {
  const auto& v = attr(e, key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ProtocolError("bad boolean \"" + v + "\"");
}

std::string format_double(double d) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

double parse_double(const std::string& s) {
  double d = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw ProtocolError("bad width \"" + s + "\"");
  return d;
}

std::optional<Phase> parse_phase(std::string_view s) {
  if (s == "syntax") return Phase::syntax;
  if (s == "semantics") return Phase::semantics;
  return std::nullopt;
}

}  // namespace

Body encode_edits(const std::vector<NodeEdit>& edits) {
  Body out;
  for (const auto& [node, e] : edits) {
    Body body;
    if (const auto* ins = std::get_if<edit::Insert>(&e)) {
      body.push_back(yxml::elem("insert", {{"offset", num(ins->offset)}}, text_body(ins->text)));
    } else if (const auto* rem = std::get_if<edit::Remove>(&e)) {
      body.push_back(yxml::elem("remove", {{"offset", num(rem->offset)}}, text_body(rem->text)));
    } else if (const auto* set = std::get_if<edit::SetNode>(&e)) {
      body.push_back(yxml::elem("set", {}, text_body(set->text)));
    } else {
      const auto& p = std::get<edit::Perspective>(e);
      Body ranges;
      for (const auto& r : p.visible) ranges.push_back(yxml::elem("range", {{"start", num(r.begin)}, {"end", num(r.end)}}));
      body.push_back(yxml::elem("perspective", {{"required", p.required ? "true" : "false"}}, std::move(ranges)));
    }
    // Consecutive edits of one node share an element.
    if (!out.empty()) {
      auto& last = std::get<Element>(out.back().node);
      if (node_of(last) == node) {
        last.body.push_back(std::move(body.front()));
        continue;
      }
    }
    out.push_back(yxml::elem("node", node_attributes(node), std::move(body)));
  }
  return out;
}

std::vector<NodeEdit> decode_edits(const Body& body) {
  std::vector<NodeEdit> out;
  for (const auto& t : body) {
    const auto& n = as_element(t, "edits");
    if (n.name != "node") throw ProtocolError("expected node element, got \"" + n.name + "\"");
    const NodeName node = node_of(n);
    for (const auto& c : n.body) {
      const auto& e = as_element(c, "node edits");
      if (e.name == "insert") {
        out.push_back({node, edit::Insert{num_attr(e, "offset"), utf8::decode(body_text(e))}});
      } else if (e.name == "remove") {
        out.push_back({node, edit::Remove{num_attr(e, "offset"), utf8::decode(body_text(e))}});
      } else if (e.name == "set") {
        out.push_back({node, edit::SetNode{utf8::decode(body_text(e))}});
      } else if (e.name == "perspective") {
        edit::Perspective p;
        p.required = bool_attr(e, "required");
        for (const auto& r : e.body) {
          const auto& re = as_element(r, "perspective");
          if (re.name != "range") throw ProtocolError("expected range element, got \"" + re.name + "\"");
          const Range range{num_attr(re, "start"), num_attr(re, "end")};
          if (range.end < range.begin) throw ProtocolError("range end before start");
          p.visible.push_back(range);
        }
        out.push_back({node, std::move(p)});
      } else {
        throw ProtocolError("unknown edit \"" + e.name + "\"");
      }
    }
  }
  return out;
}

Body encode_assignment(const Assignment& assignment) {
  Body out;
  for (const auto& [node, spans] : assignment.nodes) {
    Body body;
    for (const auto& s : spans) {
      body.push_back(yxml::elem("span", {{"id", num(s.span)},
                                         {"exec", num(s.exec)},
                                         {"start", num(s.range.begin)},
                                         {"end", num(s.range.end)}}));
    }
    out.push_back(yxml::elem("node", node_attributes(node), std::move(body)));
  }
  return out;
}

std::map<NodeName, std::vector<AssignedSpan>> decode_assignment(const Body& body) {
  std::map<NodeName, std::vector<AssignedSpan>> out;
  for (const auto& t : body) {
    const auto& n = as_element(t, "assignment");
    if (n.name != "node") throw ProtocolError("expected node element, got \"" + n.name + "\"");
    auto& spans = out[node_of(n)];
    for (const auto& c : n.body) {
      const auto& s = as_element(c, "node");
      spans.push_back({num_attr(s, "id"), num_attr(s, "exec"), {num_attr(s, "start"), num_attr(s, "end")}});
    }
  }
  return out;
}

Body encode_pretty(const pretty::Tree& tree) {
  return std::visit(
      [](const auto& n) -> Body {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, pretty::Str>) {
          yxml::Attributes a;
          if (n.width) a.emplace_back("width", format_double(*n.width));
          Body inner;
          if (!n.text.empty()) inner.push_back(yxml::text(yxml::clean(n.text)));
          if (n.markup) {
            inner = {yxml::elem(n.markup->name, n.markup->properties, std::move(inner))};
          }
          return {yxml::elem("str", std::move(a), std::move(inner))};
        } else if constexpr (std::is_same_v<N, pretty::Break>) {
          return {yxml::elem("break", {{"spaces", num(n.spaces)}, {"indent", num(n.indent)}})};
        } else {
          Body body;
          for (const auto& c : n.body) {
            auto e = encode_pretty(c);
            body.push_back(std::move(e.front()));
          }
          return {yxml::elem("block", {{"indent", num(n.indent)}, {"consistent", n.consistent ? "true" : "false"}},
                             std::move(body))};
        }
      },
      tree.node);
}

pretty::Tree decode_pretty(const Body& body) {
  if (body.size() != 1) throw ProtocolError("pretty tree must be one element");
  const auto& e = as_element(body.front(), "pretty tree");
  auto narrow = [](std::uint64_t v) {
    if (v > std::numeric_limits<unsigned>::max()) throw ProtocolError("number out of range");
    return static_cast<unsigned>(v);
  };
  if (e.name == "str") {
    pretty::Str s;
    if (const auto* w = e.attribute("width")) s.width = parse_double(*w);
    if (e.body.size() == 1) {
      if (const auto* m = std::get_if<Element>(&e.body.front().node)) {
        s.markup = MarkupElement(m->name, m->attributes);
        s.text = body_text(*m);
        return pretty::Tree{std::move(s)};
      }
    }
    s.text = body_text(e);
    return pretty::Tree{std::move(s)};
  }
  if (e.name == "break") return pretty::brk(narrow(num_attr(e, "spaces")), narrow(num_attr(e, "indent")));
  if (e.name == "block") {
    std::vector<pretty::Tree> children;
    for (const auto& c : e.body) children.push_back(decode_pretty({c}));
    return pretty::block(narrow(num_attr(e, "indent")), std::move(children), bool_attr(e, "consistent"));
  }
  throw ProtocolError("unknown pretty element \"" + e.name + "\"");
}

Body encode_report(const Report& report) {
  const auto& m = report.message;
  yxml::Attributes a{{"severity", std::string(to_string(m.severity))},
                     {"phase", std::string(to_string(m.phase))},
                     {"start", num(m.range.begin)},
                     {"end", num(m.range.end)}};
  if (report.node) {
    for (auto& kv : node_attributes(*report.node)) a.push_back(std::move(kv));
  }
  Body body{yxml::elem("body", {}, encode_pretty(m.body))};
  if (m.fix) {
    Body replacement;
    if (!m.fix->replacement.empty()) replacement.push_back(yxml::text(yxml::clean(m.fix->replacement)));
    body.push_back(yxml::elem("fix",
                              {{"start", num(m.fix->range.begin)},
                               {"end", num(m.fix->range.end)},
                               {"label", yxml::clean(m.fix->label)}},
                              std::move(replacement)));
  }
  return {yxml::elem("message", std::move(a), std::move(body))};
}

Report decode_report(const Body& body) {
  if (body.size() != 1) throw ProtocolError("report must be one message element");
  const auto& e = as_element(body.front(), "report");
  if (e.name != "message") throw ProtocolError("expected message element, got \"" + e.name + "\"");
  Report r;
  if (e.attribute("path")) r.node = node_of(e);
  auto& m = r.message;
  const auto sev = parse_severity(attr(e, "severity"));
  const auto phase = parse_phase(attr(e, "phase"));
  if (!sev) throw ProtocolError("bad severity \"" + attr(e, "severity") + "\"");
  if (!phase) throw ProtocolError("bad phase \"" + attr(e, "phase") + "\"");
  m.severity = *sev;
  m.phase = *phase;
  m.range = {num_attr(e, "start"), num_attr(e, "end")};
  bool has_body = false;
  for (const auto& c : e.body) {
    const auto& part = as_element(c, "message");
    if (part.name == "body") {
      m.body = decode_pretty(part.body);
      has_body = true;
    } else if (part.name == "fix") {
      m.fix = ActiveFix{{num_attr(part, "start"), num_attr(part, "end")}, body_text(part), attr(part, "label")};
    } else {
      throw ProtocolError("unknown message part \"" + part.name + "\"");
    }
  }
  if (!has_body) throw ProtocolError("message without body");
  return r;
}

namespace msg {

namespace {
std::string version_chunk(std::optional<VersionId> v) { return v ? std::to_string(*v) : std::string(); }
}  // namespace

Message session_start(const std::string& session) {
  return session.empty() ? Message("session_start") : Message("session_start", {session});
}

Message node_edits(std::optional<VersionId> version, const std::vector<NodeEdit>& edits) {
  return Message("node_edits", {version_chunk(version), yxml::encode(encode_edits(edits))});
}

Message blob_update(std::optional<VersionId> version, const std::string& path, std::string content) {
  return Message("blob_update", {version_chunk(version), path, std::move(content)});
}

Message dialog_result(const std::string& id, const std::string& result) {
  return Message("dialog_result", {id, result});
}

Message assigned(VersionId version, const Assignment& assignment) {
  return Message("assigned", {std::to_string(version), yxml::encode(encode_assignment(assignment))});
}

Message report(ExecId exec, const Report& r) {
  return Message("report", {std::to_string(exec), yxml::encode(encode_report(r))});
}

Message status(ExecId exec, ExecStatus s) {
  return Message("status", {std::to_string(exec), std::string(to_string(s))});
}

Message removed_versions(const std::vector<VersionId>& ids) {
  std::vector<std::string> args;
  for (auto id : ids) args.push_back(std::to_string(id));
  return Message("removed_versions", std::move(args));
}

Message protocol_error(const std::string& text) {
  Report r;
  r.message = make_message(Severity::error, {0, 0}, yxml::clean(text), Phase::syntax);
  return report(0, r);
}

}  // namespace msg

}  // namespace pide::protocol
