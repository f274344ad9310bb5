#pragma once

#include <string_view>
#include <vector>

#include "pide/text.hpp"

namespace pide {

enum class SymbolKind { plain, named, control, malformed };

std::string_view to_string(SymbolKind kind);

/// One decoded symbol. `source` views into the decoded text.
struct Symbol {
  SymbolKind kind = SymbolKind::plain;
  TextView source;
  Offset offset = 0;

  Range range() const noexcept { return {offset, offset + source.size()}; }

  /// Name without decoration: "alpha" for \<alpha>, "item" for \<^item>.
  TextView name() const noexcept;
  bool is(std::u32string_view sym) const noexcept { return source == sym; }
};

/// Lossless segmentation of `text` into symbols. The result views into
/// `text`, which must outlive it.
std::vector<Symbol> decode_symbols(TextView text);

/// Length of the symbol starting at `pos` (at least 1 if pos < text.size()).
/// A symbol shape cut off by the end of the text extends to the end.
std::size_t symbol_length(TextView text, std::size_t pos, SymbolKind* kind = nullptr);

namespace symbols {
inline constexpr std::u32string_view open = U"\\<open>";
inline constexpr std::u32string_view close = U"\\<close>";
inline constexpr std::u32string_view comment = U"\\<comment>";
inline constexpr std::u32string_view open_display = U"‹";
inline constexpr std::u32string_view close_display = U"›";
}  // namespace symbols

}  // namespace pide
