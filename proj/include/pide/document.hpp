#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "pide/keywords.hpp"
#include "pide/node_name.hpp"
#include "pide/sessions.hpp"
#include "pide/text.hpp"
#include "pide/token.hpp"

namespace pide {

using VersionId = std::uint64_t;
using SpanId = std::uint64_t;

namespace edit {
struct Insert {
  Offset offset = 0;
  Text text;
};
/// Carries the removed text so that stale edits are detected.
struct Remove {
  Offset offset = 0;
  Text text;
};
struct Perspective {
  std::vector<Range> visible;  // sorted, disjoint
  bool required = false;
};
struct SetNode {
  Text text;
};
}  // namespace edit

using Edit = std::variant<edit::Insert, edit::Remove, edit::Perspective, edit::SetNode>;
using NodeEdit = std::pair<NodeName, Edit>;

class EditError : public std::runtime_error {
 public:
  EditError(const NodeName& node, Offset offset, const std::string& expected,
            const std::string& found);
  EditError(const NodeName& node, const std::string& message);
};

class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodePerspective {
  std::vector<Range> visible;
  bool required = false;

  friend bool operator==(const NodePerspective&, const NodePerspective&) = default;
};

/// Immutable node state within one version.
struct Node {
  NodeName name;
  Text text;
  std::vector<CommandSpan> spans;
  NodePerspective perspective;
  std::optional<TheoryHeader> header;
  /// Header syntax errors and keyword conflicts, anchored in node text.
  std::optional<HeaderError> header_error;
  std::vector<NodeName> imports;
  KeywordTable keywords;
};

struct Version {
  VersionId id = 0;
  VersionId previous = 0;
  std::map<NodeName, std::shared_ptr<const Node>> nodes;
  /// Text edits leading from `previous` to this version, per node.
  std::map<NodeName, std::vector<Edit>> text_edits;

  const Node* node(const NodeName& name) const {
    auto it = nodes.find(name);
    return it == nodes.end() ? nullptr : it->second.get();
  }
};

/// Applies `edits` sequentially to `base`, producing version `id`. Spans of
/// changed nodes are recomputed; spans inside the longest common prefix and
/// suffix of the old and new span lists keep their ids.
Version apply_edits(const Version& base, const std::vector<NodeEdit>& edits, VersionId id,
                    const KeywordTable& base_keywords = demo_keywords());

/// Applies text edits (perspective edits are ignored) to `text`, validating
/// each against the intermediate result. `log`, when given, receives the
/// edits in transposable form (SetNode becomes Remove + Insert).
Text apply_text_edits(const NodeName& node, Text text, const std::vector<Edit>& edits,
                      std::vector<Edit>* log = nullptr);

/// Maps an offset through a sequence of text edits; nullopt if it falls
/// strictly inside a removed region.
std::optional<Offset> transpose(const std::vector<Edit>& edits, Offset offset);

/// Version history with a single writer. Readers obtain immutable versions.
class History {
 public:
  explicit History(KeywordTable base_keywords = demo_keywords());

  std::shared_ptr<const Version> latest() const;
  std::shared_ptr<const Version> version(VersionId id) const;
  const KeywordTable& base_keywords() const noexcept { return base_keywords_; }

  /// `proposed`, when given, must be fresh and larger than the latest id;
  /// re-proposing an existing id returns that version unchanged.
  std::shared_ptr<const Version> apply_edits(const std::vector<NodeEdit>& edits,
                                             std::optional<VersionId> proposed = std::nullopt);

  std::shared_ptr<const Version> set_perspective(const NodeName& node, std::vector<Range> visible,
                                                 bool required);

  std::optional<Offset> transpose_offset(VersionId from, VersionId to, const NodeName& node,
                                         Offset offset) const;

  /// Drops all but the latest `keep` versions; returns the removed ids.
  std::vector<VersionId> remove_versions(std::size_t keep = 10);

  std::vector<VersionId> ids() const;

 private:
  KeywordTable base_keywords_;
  mutable std::mutex mutex_;
  std::map<VersionId, std::shared_ptr<const Version>> versions_;
};

}  // namespace pide
