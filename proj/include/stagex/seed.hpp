// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef STAGEX_SEED_HPP_
#define STAGEX_SEED_HPP_

#include <cstdint>

namespace stagex {

// SplitMix64 finaliser.
inline std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a tuple of integers.
template <typename... Rest>
std::uint64_t SeedOf(std::uint64_t first, Rest... rest) {
  std::uint64_t h = SplitMix(first);
  ((h = SplitMix(h ^ static_cast<std::uint64_t>(rest))), ...);
  return h;
}

}  // namespace stagex

#endif  // STAGEX_SEED_HPP_
