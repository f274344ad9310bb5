#include "pide/sessions.hpp"

#include <algorithm>
#include <set>

#include "pide/token.hpp"

namespace pide {
namespace {

class HeaderParser {
 public:
  HeaderParser(TextView source, const KeywordTable& keywords) : source_(source) {
    for (const Token& tok : tokenize(source, keywords)) {
      if (tok.is_proper()) tokens_.push_back(tok);
    }
  }

  HeaderParse run() {
    HeaderParse result;
    if (!peek_is("theory")) return result;
    ++pos_;
    TheoryHeader header;
    auto name = name_arg();
    if (!name) return fail(result, "missing theory name");
    header.name = *name;
    if (peek_is("imports")) {
      ++pos_;
      while (auto imp = name_arg()) header.imports.push_back(*imp);
      if (header.imports.empty()) return fail(result, "missing imports after \"imports\"");
    }
    if (peek_is("keywords")) {
      ++pos_;
      if (auto err = keyword_decls(header.keywords)) return fail(result, *err);
    }
    if (!peek_is("begin")) return fail(result, "missing \"begin\" in theory header");
    result.header = std::move(header);
    return result;
  }

 private:
  TextView source_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;

  HeaderParse& fail(HeaderParse& result, std::string message) {
    Range where = pos_ < tokens_.size() ? tokens_[pos_].range
                                        : Range{source_.size(), source_.size()};
    result.error = HeaderError{std::move(message), where};
    return result;
  }

  bool peek_is(std::string_view word) const {
    return pos_ < tokens_.size() && tokens_[pos_].kind != TokenKind::quoted_string &&
           tokens_[pos_].text() == word;
  }

  std::optional<std::string> string_arg() {
    if (pos_ >= tokens_.size() || tokens_[pos_].kind != TokenKind::quoted_string) {
      return std::nullopt;
    }
    auto s = unquote_string(tokens_[pos_].source);
    if (!s) return std::nullopt;
    ++pos_;
    return utf8::encode(*s);
  }

  std::optional<std::string> name_arg() {
    if (pos_ >= tokens_.size()) return std::nullopt;
    const Token& tok = tokens_[pos_];
    if (tok.kind == TokenKind::identifier) {
      ++pos_;
      return tok.text();
    }
    return string_arg();
  }

  std::optional<std::string> keyword_decls(KeywordTable& table) {
    while (true) {
      std::vector<std::string> names;
      while (auto s = string_arg()) names.push_back(*s);
      if (names.empty()) return "expected keyword string";
      std::optional<CommandAttrs> attrs;
      if (peek_is("::")) {
        ++pos_;
        if (pos_ >= tokens_.size() || tokens_[pos_].kind != TokenKind::identifier) {
          return "expected command kind after \"::\"";
        }
        CommandAttrs a;
        a.is_load_command = tokens_[pos_].text() == "thy_load";
        ++pos_;
        if (peek_is("(")) {
          ++pos_;
          auto ext = string_arg();
          if (!ext || !peek_is(")")) return "malformed file extension declaration";
          ++pos_;
          a.file_extension = *ext;
        }
        attrs = a;
      }
      try {
        for (const auto& n : names) {
          if (attrs) {
            table.add_command(n, *attrs);
          } else {
            table.add_minor(n);
          }
        }
      } catch (const KeywordConflict& e) {
        return std::string(e.what());
      }
      if (!peek_is("and")) return std::nullopt;
      ++pos_;
    }
  }
};

std::string describe(const std::vector<NodeName>& members) {
  std::string out;
  for (const auto& m : members) {
    if (!out.empty()) out += ", ";
    out += m.path;
  }
  return out;
}

}  // namespace

HeaderParse parse_theory_header(TextView source, const KeywordTable& keywords) {
  return HeaderParser(source, keywords).run();
}

NodeName resolve_import(const NodeName& importer, const std::string& import) {
  std::string path = import;
  if (!path.ends_with(".thy")) path += ".thy";
  const std::string dir = importer.directory();
  return NodeName::theory(dir.empty() ? path : dir + "/" + path);
}

CycleError::CycleError(std::vector<NodeName> members)
    : std::runtime_error("cyclic theory imports: " + describe(members)),
      members_(std::move(members)) {}

std::vector<NodeName> topological_order(const std::map<NodeName, std::vector<NodeName>>& graph) {
  std::map<NodeName, std::size_t> pending;
  std::map<NodeName, std::vector<NodeName>> importers;
  for (const auto& [node, imports] : graph) {
    std::set<NodeName> unique;
    for (const auto& imp : imports) {
      if (graph.contains(imp)) unique.insert(imp);
    }
    pending[node] = unique.size();
    for (const auto& imp : unique) importers[imp].push_back(node);
  }
  std::set<NodeName> ready;
  for (const auto& [node, count] : pending) {
    if (count == 0) ready.insert(node);
  }
  std::vector<NodeName> order;
  while (!ready.empty()) {
    NodeName next = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(next);
    for (const auto& imp : importers[next]) {
      if (--pending[imp] == 0) ready.insert(imp);
    }
  }
  if (order.size() == graph.size()) return order;

  // Walk unresolved import edges until a node repeats.
  std::set<NodeName> done(order.begin(), order.end());
  NodeName current;
  for (const auto& [node, count] : pending) {
    if (count > 0) {
      current = node;
      break;
    }
  }
  std::vector<NodeName> path;
  std::map<NodeName, std::size_t> index;
  while (!index.contains(current)) {
    index[current] = path.size();
    path.push_back(current);
    for (const auto& imp : graph.at(current)) {
      if (graph.contains(imp) && !done.contains(imp)) {
        current = imp;
        break;
      }
    }
  }
  std::vector<NodeName> cycle(path.begin() + static_cast<std::ptrdiff_t>(index[current]),
                              path.end());
  std::sort(cycle.begin(), cycle.end());
  throw CycleError(std::move(cycle));
}

KeywordTable merge_contexts(const std::vector<KeywordTable>& tables) {
  KeywordTable out;
  for (const auto& t : tables) out = KeywordTable::merge(out, t);
  return out;
}

void SessionTree::add(SessionSpec spec) {
  if (sessions_.contains(spec.name)) {
    throw std::invalid_argument("duplicate session \"" + spec.name + "\"");
  }
  if (spec.parent && !sessions_.contains(*spec.parent)) {
    throw std::invalid_argument("unknown parent session \"" + *spec.parent + "\"");
  }
  // Parents must already exist, so links cannot form a cycle.
  sessions_.emplace(spec.name, std::move(spec));
}

const SessionSpec* SessionTree::find(const std::string& name) const {
  auto it = sessions_.find(name);
  return it == sessions_.end() ? nullptr : &it->second;
}

std::vector<std::string> SessionTree::ancestry(const std::string& name) const {
  std::vector<std::string> chain;
  for (const SessionSpec* s = find(name); s; s = s->parent ? find(*s->parent) : nullptr) {
    chain.push_back(s->name);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::optional<std::string> SessionTree::session_of(const NodeName& theory) const {
  for (const auto& [name, spec] : sessions_) {
    if (std::find(spec.theories.begin(), spec.theories.end(), theory) != spec.theories.end()) {
      return name;
    }
  }
  return std::nullopt;
}

}  // namespace pide
