#pragma once

#include <compare>
#include <string>

namespace pide {

/// Document node identity: a theory or an auxiliary file, addressed by a
/// canonical relative path.
struct NodeName {
  enum class Kind { theory, file };

  Kind kind = Kind::theory;
  std::string path;

  static NodeName theory(const std::string& path);
  static NodeName file(const std::string& path);

  /// Directory part of the path ("" for top level).
  std::string directory() const;
  /// File name without directory and extension.
  std::string stem() const;
  /// Extension without the dot ("" if none).
  std::string extension() const;

  friend bool operator==(const NodeName&, const NodeName&) = default;
  friend auto operator<=>(const NodeName&, const NodeName&) = default;
};

/// Collapses ".", "..", and repeated separators; throws std::invalid_argument
/// for empty paths and paths escaping the root.
std::string canonical_path(const std::string& path);

std::string to_string(NodeName::Kind kind);

}  // namespace pide
