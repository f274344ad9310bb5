#include "pide/document.hpp"

#include <atomic>
#include <functional>
#include <set>

namespace pide {
namespace {

std::atomic<SpanId> span_counter{0};

SpanId fresh_span_id() { return ++span_counter; }

std::string preview(TextView text) {
  constexpr std::size_t limit = 40;
  std::string s = utf8::encode(text.substr(0, limit));
  if (text.size() > limit) s += "...";
  return s;
}

struct WorkingNode {
  NodeName name;
  Text text;
  NodePerspective perspective;
  bool text_changed = false;
};

std::optional<Offset> map_insert(Offset pos, std::size_t len, Offset o) {
  return o >= pos ? o + len : o;
}

std::optional<Offset> map_remove(Offset pos, std::size_t len, Offset o) {
  if (o <= pos) return o;
  if (o >= pos + len) return o - len;
  return std::nullopt;
}

Offset clamp_remove(Offset pos, std::size_t len, Offset o) {
  if (o <= pos) return o;
  if (o >= pos + len) return o - len;
  return pos;
}

void check_perspective(const NodeName& name, const std::vector<Range>& visible, std::size_t len) {
  Offset last = 0;
  for (std::size_t i = 0; i < visible.size(); ++i) {
    const Range& r = visible[i];
    if (r.begin > r.end || r.end > len) {
      throw EditError(name, "perspective range " + to_string(r) + " outside text of length " +
                                std::to_string(len));
    }
    if (i > 0 && r.begin < last) {
      throw EditError(name, "perspective ranges not sorted and disjoint at " + to_string(r));
    }
    last = r.end;
  }
}

void shift_perspective(NodePerspective& p, const std::function<Offset(Offset)>& f) {
  for (Range& r : p.visible) r = {f(r.begin), f(r.end)};
}

void apply_one(WorkingNode& node, const Edit& e, std::vector<Edit>& log) {
  std::visit(
      [&](const auto& ed) {
        using T = std::decay_t<decltype(ed)>;
        if constexpr (std::is_same_v<T, edit::Insert>) {
          if (ed.offset > node.text.size()) {
            throw EditError(node.name, ed.offset, "offset within [0, " +
                                                      std::to_string(node.text.size()) + "]",
                            "offset " + std::to_string(ed.offset));
          }
          node.text.insert(ed.offset, ed.text);
          shift_perspective(node.perspective,
                            [&](Offset o) { return *map_insert(ed.offset, ed.text.size(), o); });
          node.text_changed = true;
          log.push_back(ed);
        } else if constexpr (std::is_same_v<T, edit::Remove>) {
          if (ed.offset > node.text.size()) {
            throw EditError(node.name, ed.offset, "\"" + preview(ed.text) + "\"",
                            "offset beyond end of text (length " +
                                std::to_string(node.text.size()) + ")");
          }
          const TextView found = TextView(node.text).substr(ed.offset, ed.text.size());
          if (found != ed.text) {
            throw EditError(node.name, ed.offset, "\"" + preview(ed.text) + "\"",
                            "\"" + preview(found) + "\"");
          }
          node.text.erase(ed.offset, ed.text.size());
          shift_perspective(node.perspective,
                            [&](Offset o) { return clamp_remove(ed.offset, ed.text.size(), o); });
          node.text_changed = true;
          log.push_back(ed);
        } else if constexpr (std::is_same_v<T, edit::Perspective>) {
          check_perspective(node.name, ed.visible, node.text.size());
          node.perspective = {ed.visible, ed.required};
        } else {
          const std::size_t old_len = node.text.size();
          log.push_back(edit::Remove{0, node.text});
          log.push_back(edit::Insert{0, ed.text});
          node.text = ed.text;
          const std::size_t len = node.text.size();
          shift_perspective(node.perspective, [&](Offset o) { return std::min(o, len); });
          (void)old_len;
          node.text_changed = true;
        }
      },
      e);
}

bool same_span(const CommandSpan& a, const CommandSpan& b) {
  return a.command == b.command && a.source == b.source;
}

void reuse_span_ids(const std::vector<CommandSpan>& old_spans, std::vector<CommandSpan>& spans) {
  const std::size_t n = std::min(old_spans.size(), spans.size());
  std::size_t prefix = 0;
  while (prefix < n && same_span(old_spans[prefix], spans[prefix])) {
    spans[prefix].id = old_spans[prefix].id;
    ++prefix;
  }
  std::size_t suffix = 0;
  while (suffix < n - prefix &&
         same_span(old_spans[old_spans.size() - 1 - suffix], spans[spans.size() - 1 - suffix])) {
    spans[spans.size() - 1 - suffix].id = old_spans[old_spans.size() - 1 - suffix].id;
    ++suffix;
  }
  for (std::size_t i = prefix; i + suffix < spans.size(); ++i) spans[i].id = fresh_span_id();
}

std::vector<CommandSpan> file_spans(const Text& text) {
  if (text.empty()) return {};
  CommandSpan span;
  span.range = {0, text.size()};
  span.source = text;
  span.digest = Digest::of(text);
  return {std::move(span)};
}

}  // namespace

EditError::EditError(const NodeName& node, Offset offset, const std::string& expected,
                     const std::string& found)
    : std::runtime_error("rejected edit on " + node.path + " at offset " + std::to_string(offset) +
                         ": expected " + expected + ", found " + found) {}

EditError::EditError(const NodeName& node, const std::string& message)
    : std::runtime_error("rejected edit on " + node.path + ": " + message) {}

Text apply_text_edits(const NodeName& node, Text text, const std::vector<Edit>& edits,
                      std::vector<Edit>* log) {
  WorkingNode w{node, std::move(text), {}, false};
  std::vector<Edit> local;
  for (const Edit& e : edits) {
    if (std::holds_alternative<edit::Perspective>(e)) continue;
    apply_one(w, e, log ? *log : local);
  }
  return std::move(w.text);
}

std::optional<Offset> transpose(const std::vector<Edit>& edits, Offset offset) {
  std::optional<Offset> o = offset;
  for (const Edit& e : edits) {
    if (!o) return std::nullopt;
    if (const auto* ins = std::get_if<edit::Insert>(&e)) {
      o = map_insert(ins->offset, ins->text.size(), *o);
    } else if (const auto* rem = std::get_if<edit::Remove>(&e)) {
      o = map_remove(rem->offset, rem->text.size(), *o);
    }
  }
  return o;
}

Version apply_edits(const Version& base, const std::vector<NodeEdit>& edits, VersionId id,
                    const KeywordTable& base_keywords) {
  std::map<NodeName, WorkingNode> working;
  Version next;
  next.id = id;
  next.previous = base.id;
  next.nodes = base.nodes;

  for (const auto& [name, e] : edits) {
    auto it = working.find(name);
    if (it == working.end()) {
      WorkingNode w{name, {}, {}, false};
      if (const Node* old = base.node(name)) {
        w.text = old->text;
        w.perspective = old->perspective;
      }
      it = working.emplace(name, std::move(w)).first;
    }
    apply_one(it->second, e, next.text_edits[name]);
  }
  for (auto it = next.text_edits.begin(); it != next.text_edits.end();) {
    it = it->second.empty() ? next.text_edits.erase(it) : std::next(it);
  }

  // Headers depend only on a node's own text.
  struct Prepared {
    Text text;
    NodePerspective perspective;
    std::optional<TheoryHeader> header;
    std::optional<HeaderError> header_error;
    std::vector<NodeName> imports;
    bool text_changed = false;
  };
  std::map<NodeName, Prepared> prepared;
  for (const auto& [name, node] : next.nodes) {
    prepared[name] = {node->text, node->perspective, node->header, node->header_error,
                      node->imports, false};
  }
  for (auto& [name, w] : working) {
    Prepared& p = prepared[name];
    p.perspective = w.perspective;
    if (!w.text_changed && base.node(name)) continue;
    p.text = std::move(w.text);
    p.text_changed = true;
    p.header.reset();
    p.header_error.reset();
    p.imports.clear();
    if (name.kind != NodeName::Kind::theory) continue;
    HeaderParse hp = parse_theory_header(p.text, base_keywords);
    p.header = std::move(hp.header);
    p.header_error = std::move(hp.error);
    if (p.header) {
      for (const auto& imp : p.header->imports) {
        try {
          p.imports.push_back(resolve_import(name, imp));
        } catch (const std::invalid_argument& e) {
          if (!p.header_error) p.header_error = HeaderError{e.what(), {0, 0}};
        }
      }
    }
  }

  // Effective keywords: base plus declarations of the node and everything
  // it imports transitively.
  auto effective = [&](const NodeName& root, std::optional<HeaderError>& error) {
    KeywordTable table = base_keywords;
    std::set<NodeName> seen;
    std::vector<NodeName> stack{root};
    while (!stack.empty()) {
      NodeName n = stack.back();
      stack.pop_back();
      if (!seen.insert(n).second) continue;
      auto it = prepared.find(n);
      if (it == prepared.end()) continue;
      if (it->second.header) {
        try {
          table = KeywordTable::merge(table, it->second.header->keywords);
        } catch (const KeywordConflict& e) {
          if (!error) error = HeaderError{e.what(), {0, 0}};
        }
      }
      for (const auto& imp : it->second.imports) stack.push_back(imp);
    }
    return table;
  };

  for (auto& [name, p] : prepared) {
    const Node* old = base.node(name);
    if (name.kind == NodeName::Kind::file) {
      if (old && !p.text_changed && old->perspective == p.perspective) continue;
      auto node = std::make_shared<Node>();
      node->name = name;
      node->text = p.text;
      node->perspective = p.perspective;
      node->spans = file_spans(node->text);
      reuse_span_ids(old ? old->spans : std::vector<CommandSpan>{}, node->spans);
      next.nodes[name] = std::move(node);
      continue;
    }
    std::optional<HeaderError> error = p.header_error;
    KeywordTable keywords = effective(name, error);
    if (old && !p.text_changed && old->keywords == keywords) {
      if (!(old->perspective == p.perspective) || old->header_error.has_value() != error.has_value()) {
        auto node = std::make_shared<Node>(*old);
        node->perspective = p.perspective;
        node->header_error = error;
        next.nodes[name] = std::move(node);
      }
      continue;
    }
    auto node = std::make_shared<Node>();
    node->name = name;
    node->text = std::move(p.text);
    node->perspective = p.perspective;
    node->header = p.header;
    node->header_error = std::move(error);
    node->imports = p.imports;
    node->keywords = std::move(keywords);
    node->spans = parse_spans(tokenize(node->text, node->keywords), node->keywords);
    reuse_span_ids(old ? old->spans : std::vector<CommandSpan>{}, node->spans);
    next.nodes[name] = std::move(node);
  }
  return next;
}

History::History(KeywordTable base_keywords) : base_keywords_(std::move(base_keywords)) {
  auto initial = std::make_shared<Version>();
  versions_.emplace(0, std::move(initial));
}

std::shared_ptr<const Version> History::latest() const {
  std::lock_guard lock(mutex_);
  return versions_.rbegin()->second;
}

std::shared_ptr<const Version> History::version(VersionId id) const {
  std::lock_guard lock(mutex_);
  auto it = versions_.find(id);
  if (it == versions_.end()) throw LookupError("unknown version " + std::to_string(id));
  return it->second;
}

std::vector<VersionId> History::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<VersionId> out;
  for (const auto& [id, v] : versions_) out.push_back(id);
  return out;
}

std::shared_ptr<const Version> History::apply_edits(const std::vector<NodeEdit>& edits,
                                                    std::optional<VersionId> proposed) {
  std::shared_ptr<const Version> base;
  VersionId id = 0;
  {
    std::lock_guard lock(mutex_);
    base = versions_.rbegin()->second;
    if (proposed) {
      if (auto it = versions_.find(*proposed); it != versions_.end()) return it->second;
      if (*proposed <= base->id) {
        throw LookupError("proposed version " + std::to_string(*proposed) +
                          " is not newer than latest version " + std::to_string(base->id));
      }
      id = *proposed;
    } else {
      id = base->id + 1;
    }
  }
  auto next = std::make_shared<const Version>(pide::apply_edits(*base, edits, id, base_keywords_));
  std::lock_guard lock(mutex_);
  versions_.emplace(id, next);
  return next;
}

std::shared_ptr<const Version> History::set_perspective(const NodeName& node,
                                                        std::vector<Range> visible, bool required) {
  return apply_edits({{node, edit::Perspective{std::move(visible), required}}});
}

std::optional<Offset> History::transpose_offset(VersionId from, VersionId to, const NodeName& node,
                                                Offset offset) const {
  std::lock_guard lock(mutex_);
  auto it = versions_.find(from);
  if (it == versions_.end()) throw LookupError("unknown version " + std::to_string(from));
  if (!versions_.contains(to)) throw LookupError("unknown version " + std::to_string(to));
  if (to < from) throw LookupError("version " + std::to_string(from) + " does not precede " +
                                   std::to_string(to));
  if (!it->second->node(node) && !versions_.at(to)->node(node)) {
    throw LookupError("unknown node " + node.path);
  }
  std::optional<Offset> o = offset;
  VersionId prev = from;
  for (++it; it != versions_.end() && it->first <= to; ++it) {
    if (it->second->previous != prev) {
      throw LookupError("version chain broken between " + std::to_string(prev) + " and " +
                        std::to_string(it->first));
    }
    prev = it->first;
    auto e = it->second->text_edits.find(node);
    if (e != it->second->text_edits.end()) o = o ? transpose(e->second, *o) : std::nullopt;
  }
  return o;
}

std::vector<VersionId> History::remove_versions(std::size_t keep) {
  std::lock_guard lock(mutex_);
  std::vector<VersionId> removed;
  keep = std::max<std::size_t>(keep, 1);
  while (versions_.size() > keep) {
    removed.push_back(versions_.begin()->first);
    versions_.erase(versions_.begin());
  }
  return removed;
}

}  // namespace pide
