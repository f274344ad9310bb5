#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "pide/text.hpp"

namespace pide {

/// SHA-256 content digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest of(std::string_view data);
  static Digest of(TextView text);

  std::string hex() const;

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

}  // namespace pide

template <>
struct std::hash<pide::Digest> {
  std::size_t operator()(const pide::Digest& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
    return h;
  }
};
