#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pide/markup.hpp"

namespace pide::pretty {

/// Width of a piece of UTF-8 text in abstract width units.
using Metric = std::function<double(std::string_view)>;

/// One unit per character.
Metric unit_metric();

/// Per-character widths; characters missing from `widths` use `fallback`.
Metric proportional_metric(std::map<char32_t, double> widths, double fallback = 1.0);

struct Str {
  std::string text;               // UTF-8, no line separators
  std::optional<double> width;    // overrides the metric when set
  std::optional<MarkupElement> markup;  // carried opaquely

  friend bool operator==(const Str&, const Str&) = default;
};

struct Break {
  unsigned spaces = 1;
  unsigned indent = 0;  // extra indentation when the break becomes a newline

  friend bool operator==(const Break&, const Break&) = default;
};

struct Tree;

struct Block {
  unsigned indent = 0;
  std::vector<Tree> body;
  bool consistent = false;

  friend bool operator==(const Block&, const Block&) = default;
};

struct Tree {
  std::variant<Str, Break, Block> node;

  friend bool operator==(const Tree&, const Tree&) = default;
};

Tree str(std::string text);
Tree brk(unsigned spaces = 1, unsigned indent = 0);
Tree block(unsigned indent, std::vector<Tree> body, bool consistent = false);

/// Words of `text` separated by breakable spaces in an inconsistent block.
Tree paragraph(std::string_view text, unsigned indent = 2);

/// Rendering with every break as its spaces.
std::string unbroken(const Tree& tree);

/// Oppen-style line breaking against `margin`. Consistent blocks that do
/// not fit break at every break; inconsistent blocks break only where the
/// next chunk would overflow.
std::vector<std::string> format(const Tree& tree, double margin, const Metric& metric = unit_metric());

/// Throws std::invalid_argument on negative widths or line separators in Str.
void validate(const Tree& tree);

}  // namespace pide::pretty
