#pragma once

#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pide/document.hpp"
#include "pide/text.hpp"

namespace pide {

struct MarkupElement {
  std::string name;
  std::vector<std::pair<std::string, std::string>> properties;

  MarkupElement() = default;
  MarkupElement(std::string n, std::vector<std::pair<std::string, std::string>> props = {});

  const std::string* property(std::string_view key) const;

  friend bool operator==(const MarkupElement&, const MarkupElement&) = default;
};

struct MarkupNode {
  Range range;
  MarkupElement element;
  std::vector<MarkupNode> children;

  friend bool operator==(const MarkupNode&, const MarkupNode&) = default;
};

class MarkupOverlap : public std::runtime_error {
 public:
  MarkupOverlap(const Range& added, const Range& existing);
};

/// Selects elements by name; an empty filter accepts everything.
class NameFilter {
 public:
  NameFilter() = default;
  NameFilter(std::initializer_list<std::string> names) : names_(names) {}
  explicit NameFilter(std::vector<std::string> names) : names_(std::move(names)) {}

  bool operator()(const MarkupElement& e) const;

 private:
  std::vector<std::string> names_;
};

using MarkupEntry = std::pair<Range, MarkupElement>;

/// Well-nested annotations over text. Children lie within their parent
/// (an identical range nests under the existing element); siblings are
/// sorted and do not overlap.
class MarkupTree {
 public:
  MarkupTree() = default;

  /// Returns a tree that also contains `element` over `range`; throws
  /// MarkupOverlap when the range crosses an existing range.
  MarkupTree add(Range range, MarkupElement element) const;

  /// Elements whose range intersects `query` and pass `filter`, in document
  /// order with enclosing elements first.
  std::vector<MarkupEntry> cumulate(Range query, const NameFilter& filter = {}) const;

  /// All elements in document order.
  std::vector<MarkupEntry> entries() const;

  MarkupTree shifted(Offset delta) const;

  const std::vector<MarkupNode>& roots() const noexcept { return roots_; }
  std::size_t size() const;
  bool empty() const noexcept { return roots_.empty(); }

  /// Structural invariant check; `length` bounds all ranges.
  bool well_nested(Offset length) const;

  friend bool operator==(const MarkupTree&, const MarkupTree&) = default;

 private:
  std::vector<MarkupNode> roots_;
};

/// Read-only view of markup recorded against a base version, reported in
/// the offsets of the current text after pending edits.
class Snapshot {
 public:
  /// `markup` is in base-text offsets; `pending` edits lead from the base
  /// text to the current text and are validated on construction.
  Snapshot(VersionId base, NodeName node, Text base_text, MarkupTree markup,
           std::vector<Edit> pending = {});

  VersionId base_version() const noexcept { return base_; }
  const NodeName& node() const noexcept { return node_; }
  const Text& text() const noexcept { return text_; }
  const MarkupTree& base_markup() const noexcept { return markup_; }

  /// Base range to current range; nullopt when either end was edited away.
  std::optional<Range> transpose(Range base_range) const;

  /// Query in current offsets.
  std::vector<MarkupEntry> cumulate(Range query, const NameFilter& filter = {}) const;

 private:
  VersionId base_;
  NodeName node_;
  Text text_;
  MarkupTree markup_;
  std::vector<Edit> pending_;
};

}  // namespace pide
