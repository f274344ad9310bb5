#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace pide {

/// Node text as Unicode scalar values. All document offsets index this
/// representation, never raw UTF-8 bytes.
using Text = std::u32string;
using TextView = std::u32string_view;
using Offset = std::size_t;

/// Half-open interval [begin, end) of character offsets.
struct Range {
  Offset begin = 0;
  Offset end = 0;

  constexpr Offset length() const noexcept { return end - begin; }
  constexpr bool empty() const noexcept { return begin == end; }
  constexpr bool contains(const Range& other) const noexcept {
    return begin <= other.begin && other.end <= end;
  }
  constexpr Range shifted(Offset delta) const noexcept { return {begin + delta, end + delta}; }

  friend constexpr bool operator==(const Range&, const Range&) = default;
  friend constexpr auto operator<=>(const Range&, const Range&) = default;
};

/// Intersection test shared by markup queries and perspective checks.
/// An empty range [o,o) behaves like the point o: it meets [b,e) iff b <= o < e.
constexpr bool intersects(const Range& a, const Range& b) noexcept {
  if (a.empty() && b.empty()) return a.begin == b.begin;
  if (a.empty()) return b.begin <= a.begin && a.begin < b.end;
  if (b.empty()) return a.begin <= b.begin && b.begin < a.end;
  return a.begin < b.end && b.begin < a.end;
}

namespace utf8 {

/// Decodes UTF-8; malformed sequences become U+FFFD.
Text decode(std::string_view bytes);
std::string encode(TextView text);
std::string encode(char32_t c);

}  // namespace utf8

std::string to_string(const Range& r);

}  // namespace pide
