#pragma once

#include <cstdint>

namespace choir {

/// Independent 64-bit seed for stream (a, b) of a base seed (splitmix64 mixing).
inline std::uint64_t deriveSeed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0)
{
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

} // namespace choir
