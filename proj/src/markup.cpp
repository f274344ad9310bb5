#include "pide/markup.hpp"

#include <algorithm>

namespace pide {
namespace {

bool crosses(const Range& a, const Range& b) {
  const bool overlap = a.begin < b.end && b.begin < a.end;
  return overlap && !a.contains(b) && !b.contains(a);
}

void insert(std::vector<MarkupNode>& nodes, const Range& range, MarkupElement&& element) {
  for (auto& node : nodes) {
    if (node.range.contains(range)) return insert(node.children, range, std::move(element));
  }
  MarkupNode fresh{range, std::move(element), {}};
  std::vector<MarkupNode> rest;
  for (auto& node : nodes) {
    if (crosses(node.range, range)) throw MarkupOverlap(range, node.range);
    if (range.contains(node.range)) {
      fresh.children.push_back(std::move(node));
    } else {
      rest.push_back(std::move(node));
    }
  }
  auto pos = std::lower_bound(rest.begin(), rest.end(), fresh, [](const auto& a, const auto& b) {
    return std::pair(a.range.begin, a.range.end) < std::pair(b.range.begin, b.range.end);
  });
  rest.insert(pos, std::move(fresh));
  nodes = std::move(rest);
}

bool may_reach(const Range& node, const Range& query) {
  return !(node.end < query.begin || node.begin > query.end);
}

void collect(const std::vector<MarkupNode>& nodes, const Range& query, const NameFilter& filter,
             bool everything, std::vector<MarkupEntry>& out) {
  for (const auto& node : nodes) {
    if (!everything && !may_reach(node.range, query)) continue;
    if ((everything || intersects(node.range, query)) && filter(node.element)) {
      out.emplace_back(node.range, node.element);
    }
    collect(node.children, query, filter, everything, out);
  }
}

std::size_t count(const std::vector<MarkupNode>& nodes) {
  std::size_t n = nodes.size();
  for (const auto& node : nodes) n += count(node.children);
  return n;
}

void shift(std::vector<MarkupNode>& nodes, Offset delta) {
  for (auto& node : nodes) {
    node.range = node.range.shifted(delta);
    shift(node.children, delta);
  }
}

bool check(const std::vector<MarkupNode>& nodes, const Range& bounds) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.element.name.empty() || node.range.begin > node.range.end) return false;
    if (!bounds.contains(node.range)) return false;
    if (i > 0) {
      const Range& prev = nodes[i - 1].range;
      if (std::pair(prev.begin, prev.end) > std::pair(node.range.begin, node.range.end)) {
        return false;
      }
      if (prev.begin < node.range.end && node.range.begin < prev.end) return false;
    }
    if (!check(node.children, node.range)) return false;
  }
  return true;
}

}  // namespace

MarkupElement::MarkupElement(std::string n, std::vector<std::pair<std::string, std::string>> props)
    : name(std::move(n)), properties(std::move(props)) {
  for (std::size_t i = 0; i < properties.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (properties[i].first == properties[j].first) {
        throw std::invalid_argument("duplicate markup property \"" + properties[i].first + "\"");
      }
    }
  }
}

const std::string* MarkupElement::property(std::string_view key) const {
  for (const auto& [k, v] : properties) {
    if (k == key) return &v;
  }
  return nullptr;
}

MarkupOverlap::MarkupOverlap(const Range& added, const Range& existing)
    : std::runtime_error("markup range " + to_string(added) + " overlaps " + to_string(existing) +
                         " without nesting") {}

bool NameFilter::operator()(const MarkupElement& e) const {
  return names_.empty() || std::find(names_.begin(), names_.end(), e.name) != names_.end();
}

MarkupTree MarkupTree::add(Range range, MarkupElement element) const {
  if (element.name.empty()) throw std::invalid_argument("markup element without name");
  if (range.begin > range.end) throw std::invalid_argument("inverted markup range");
  MarkupTree out = *this;
  insert(out.roots_, range, std::move(element));
  return out;
}

std::vector<MarkupEntry> MarkupTree::cumulate(Range query, const NameFilter& filter) const {
  std::vector<MarkupEntry> out;
  collect(roots_, query, filter, false, out);
  return out;
}

std::vector<MarkupEntry> MarkupTree::entries() const {
  std::vector<MarkupEntry> out;
  collect(roots_, {}, {}, true, out);
  return out;
}

MarkupTree MarkupTree::shifted(Offset delta) const {
  MarkupTree out = *this;
  shift(out.roots_, delta);
  return out;
}

std::size_t MarkupTree::size() const { return count(roots_); }

bool MarkupTree::well_nested(Offset length) const { return check(roots_, {0, length}); }

Snapshot::Snapshot(VersionId base, NodeName node, Text base_text, MarkupTree markup,
                   std::vector<Edit> pending)
    : base_(base), node_(std::move(node)), markup_(std::move(markup)) {
  text_ = apply_text_edits(node_, std::move(base_text), pending, &pending_);
}

std::optional<Range> Snapshot::transpose(Range base_range) const {
  auto begin = pide::transpose(pending_, base_range.begin);
  auto end = pide::transpose(pending_, base_range.end);
  if (!begin || !end) return std::nullopt;
  return Range{*begin, *end};
}

std::vector<MarkupEntry> Snapshot::cumulate(Range query, const NameFilter& filter) const {
  std::vector<MarkupEntry> out;
  for (auto& [range, element] : markup_.entries()) {
    if (!filter(element)) continue;
    auto current = transpose(range);
    if (current && intersects(*current, query)) out.emplace_back(*current, std::move(element));
  }
  return out;
}

}  // namespace pide
