#pragma once

#include <cstdint>

namespace nnn {

/// splitmix64 finaliser; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based uniform draw on [0, 1). The value depends only on
/// (seed, stream, counter), so draws can be generated in any order or in
/// parallel and still reproduce exactly.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  const std::uint64_t h = mix64(mix64(seed ^ mix64(stream)) + counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace nnn
