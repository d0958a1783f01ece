#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace isvd {

using Seed = std::uint64_t;

// splitmix64 finalizer, used as a cheap mixer for seed derivation.
constexpr Seed splitmix64(Seed x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for a labelled substream. Every stochastic routine takes an
// explicit seed derived this way, so any run can be replayed exactly
// regardless of evaluation order.
inline Seed deriveSeed(Seed parent, std::string_view label, Seed index = 0) {
  Seed h = splitmix64(parent ^ 0x8f1bbcdcbfa53e0bULL);
  for (char ch : label) h = splitmix64(h ^ static_cast<unsigned char>(ch));
  return splitmix64(h ^ index);
}

inline std::mt19937_64 makeEngine(Seed seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace isvd
