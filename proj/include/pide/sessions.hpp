#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pide/keywords.hpp"
#include "pide/node_name.hpp"
#include "pide/text.hpp"

namespace pide {

/// `theory NAME imports A B keywords "k" :: thy_decl and "f" :: thy_load ("ext") begin`
struct TheoryHeader {
  std::string name;
  std::vector<std::string> imports;
  KeywordTable keywords;
};

struct HeaderError {
  std::string message;
  Range range;
};

struct HeaderParse {
  /// nullopt when the text does not start with a theory header at all.
  std::optional<TheoryHeader> header;
  std::optional<HeaderError> error;
};

/// Parses the theory header at the start of `source`, using `keywords` for
/// tokenization.
HeaderParse parse_theory_header(TextView source, const KeywordTable& keywords);

/// Resolves an import name relative to the importing theory's directory.
NodeName resolve_import(const NodeName& importer, const std::string& import);

class CycleError : public std::runtime_error {
 public:
  explicit CycleError(std::vector<NodeName> members);
  const std::vector<NodeName>& members() const noexcept { return members_; }

 private:
  std::vector<NodeName> members_;
};

/// Orders nodes so that each follows all of its imports; ties broken by
/// name. Imports of nodes absent from `graph` are ignored. Throws
/// CycleError naming the members of one cycle.
std::vector<NodeName> topological_order(const std::map<NodeName, std::vector<NodeName>>& graph);

/// Canonical merge of keyword contexts; throws KeywordConflict.
KeywordTable merge_contexts(const std::vector<KeywordTable>& tables);

struct SessionSpec {
  std::string name;
  std::optional<std::string> parent;
  std::vector<NodeName> theories;
};

/// Parent links between sessions; rejects unknown parents and cycles.
class SessionTree {
 public:
  void add(SessionSpec spec);
  const SessionSpec* find(const std::string& name) const;
  /// Session chain from the root down to `name`.
  std::vector<std::string> ancestry(const std::string& name) const;
  /// Session owning `theory`, if any.
  std::optional<std::string> session_of(const NodeName& theory) const;

 private:
  std::map<std::string, SessionSpec> sessions_;
};

}  // namespace pide
