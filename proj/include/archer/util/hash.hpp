#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "archer/util/rng.hpp"

namespace archer::util {

inline std::uint64_t fnv1a64(std::span<const std::byte> data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (std::byte b : data) {
    h ^= std::to_integer<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// 32-byte non-cryptographic digest: fnv1a lanes re-mixed through splitmix64.
// Used by the mock security suite and for ring placement of small keys.
inline std::array<std::byte, 32> mock_digest(std::span<const std::byte> data) {
  std::array<std::byte, 32> out{};
  for (int lane = 0; lane < 4; ++lane) {
    std::uint64_t state = fnv1a64(data, 0xcbf29ce484222325ULL ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(lane + 1)));
    std::uint64_t v = splitmix64(state);
    v ^= splitmix64(state);
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(lane * 8 + i)] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
  }
  return out;
}

}  // namespace archer::util
