#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "pide/text.hpp"

namespace test {

inline pide::Text T(std::string_view utf8) { return pide::utf8::decode(utf8); }
inline std::string S(pide::TextView text) { return pide::utf8::encode(text); }

/// Fixed seeds keep property runs reproducible; failures print the seed.
inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed * 0x9e3779b97f4a7c15ULL + 1); }

inline std::size_t pick(std::mt19937_64& g, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(g);
}

inline bool chance(std::mt19937_64& g, double p) { return std::bernoulli_distribution(p)(g); }

}  // namespace test
