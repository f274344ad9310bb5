#include "pide/node_name.hpp"

#include <stdexcept>
#include <vector>

namespace pide {

std::string canonical_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i <= path.size()) {
    std::size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    std::string part = path.substr(i, j - i);
    if (part == "..") {
      if (parts.empty()) throw std::invalid_argument("path escapes root: " + path);
      parts.pop_back();
    } else if (!part.empty() && part != ".") {
      parts.push_back(std::move(part));
    }
    i = j + 1;
  }
  if (parts.empty()) throw std::invalid_argument("empty path: \"" + path + "\"");
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += '/';
    out += p;
  }
  return out;
}

NodeName NodeName::theory(const std::string& path) { return {Kind::theory, canonical_path(path)}; }
NodeName NodeName::file(const std::string& path) { return {Kind::file, canonical_path(path)}; }

std::string NodeName::directory() const {
  const auto slash = path.rfind('/');
  return slash == std::string::npos ? "" : path.substr(0, slash);
}

std::string NodeName::stem() const {
  const auto slash = path.rfind('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.rfind('.');
  return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

std::string NodeName::extension() const {
  const auto slash = path.rfind('/');
  const std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.rfind('.');
  return dot == std::string::npos || dot == 0 ? "" : base.substr(dot + 1);
}

std::string to_string(NodeName::Kind kind) {
  return kind == NodeName::Kind::theory ? "theory" : "file";
}

}  // namespace pide
