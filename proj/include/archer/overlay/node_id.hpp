#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "archer/util/bytes.hpp"
#include "archer/util/hash.hpp"
#include "archer/util/rng.hpp"

namespace archer::overlay {

// Unsigned 160-bit identifier on the ring. Limbs are stored little-endian;
// ring arithmetic is taken modulo 2^bits for the configured ring width, which
// lets tests run on small rings while production uses the full 160 bits.
class NodeId {
 public:
  static constexpr unsigned kMaxBits = 160;
  static constexpr unsigned kLimbs = 3;  // 192 bits of storage, top 32 always zero

  constexpr NodeId() = default;

  static constexpr NodeId from_u64(std::uint64_t v) {
    NodeId id;
    id.w_[0] = v;
    return id;
  }

  // Big-endian 20-byte form, as carried inside certificates.
  static NodeId from_bytes(std::span<const std::byte, 20> data) {
    NodeId id;
    for (unsigned i = 0; i < 20; ++i) {
      const unsigned bit = (19 - i) * 8;
      id.w_[bit / 64] |= std::to_integer<std::uint64_t>(data[i]) << (bit % 64);
    }
    return id;
  }

  std::array<std::byte, 20> to_bytes() const {
    std::array<std::byte, 20> out{};
    for (unsigned i = 0; i < 20; ++i) {
      const unsigned bit = (19 - i) * 8;
      out[i] = static_cast<std::byte>((w_[bit / 64] >> (bit % 64)) & 0xff);
    }
    return out;
  }

  static std::optional<NodeId> from_hex(std::string_view s) {
    if (s.empty() || s.size() > 40) return std::nullopt;
    NodeId id;
    for (char c : s) {
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else return std::nullopt;
      id = id.shifted_left_4();
      id.w_[0] |= static_cast<std::uint64_t>(v);
    }
    return id;
  }

  // Lowercase hex, zero-padded to the digit count of the ring width.
  std::string to_hex(unsigned bits = kMaxBits) const {
    const unsigned digits = (bits + 3) / 4;
    std::string out(digits, '0');
    static constexpr char hexd[] = "0123456789abcdef";
    for (unsigned i = 0; i < digits; ++i) {
      const unsigned nibble = i * 4;  // position from the low end
      const unsigned v = static_cast<unsigned>((w_[nibble / 64] >> (nibble % 64)) & 0xf);
      out[digits - 1 - i] = hexd[v];
    }
    return out;
  }

  std::uint64_t low64() const { return w_[0]; }

  constexpr bool is_zero() const { return w_[0] == 0 && w_[1] == 0 && w_[2] == 0; }

  friend constexpr bool operator==(const NodeId&, const NodeId&) = default;

  friend constexpr std::strong_ordering operator<=>(const NodeId& a, const NodeId& b) {
    for (int i = kLimbs - 1; i >= 0; --i) {
      if (a.w_[i] != b.w_[i]) return a.w_[i] <=> b.w_[i];
    }
    return std::strong_ordering::equal;
  }

  friend constexpr NodeId ring_add(const NodeId& a, const NodeId& b, unsigned bits) {
    NodeId r;
    unsigned carry = 0;
    for (unsigned i = 0; i < kLimbs; ++i) {
      const std::uint64_t s = a.w_[i] + b.w_[i];
      const std::uint64_t t = s + carry;
      r.w_[i] = t;
      carry = (s < a.w_[i]) || (t < s) ? 1 : 0;
    }
    return r.masked(bits);
  }

  // (a - b) mod 2^bits
  friend constexpr NodeId ring_sub(const NodeId& a, const NodeId& b, unsigned bits) {
    NodeId r;
    unsigned borrow = 0;
    for (unsigned i = 0; i < kLimbs; ++i) {
      const std::uint64_t d = a.w_[i] - b.w_[i];
      const std::uint64_t t = d - borrow;
      r.w_[i] = t;
      borrow = (a.w_[i] < b.w_[i]) || (d < static_cast<std::uint64_t>(borrow)) ? 1 : 0;
    }
    return r.masked(bits);
  }

  // Shorter way around the ring: min(|a-b|, 2^bits - |a-b|).
  friend constexpr NodeId ring_distance(const NodeId& a, const NodeId& b, unsigned bits) {
    const NodeId d1 = ring_sub(a, b, bits);
    const NodeId d2 = ring_sub(b, a, bits);
    return d1 < d2 ? d1 : d2;
  }

  // Clockwise gap from a to b: (b - a) mod 2^bits.
  friend constexpr NodeId ring_gap(const NodeId& a, const NodeId& b, unsigned bits) {
    return ring_sub(b, a, bits);
  }

  static constexpr NodeId pow2(unsigned bit) {
    NodeId id;
    if (bit < kMaxBits) id.w_[bit / 64] = 1ULL << (bit % 64);
    return id;
  }

  constexpr NodeId masked(unsigned bits) const {
    NodeId r = *this;
    for (unsigned i = 0; i < kLimbs; ++i) {
      const unsigned lo = i * 64;
      if (bits <= lo) {
        r.w_[i] = 0;
      } else if (bits < lo + 64) {
        r.w_[i] &= (1ULL << (bits - lo)) - 1;
      }
    }
    return r;
  }

  // Approximate magnitude, for diagnostics and shortcut sampling only.
  double to_double() const {
    return static_cast<double>(w_[0]) + static_cast<double>(w_[1]) * 0x1.0p64 + static_cast<double>(w_[2]) * 0x1.0p128;
  }

 private:
  constexpr NodeId shifted_left_4() const {
    NodeId r;
    for (int i = kLimbs - 1; i >= 0; --i) {
      r.w_[i] = w_[i] << 4;
      if (i > 0) r.w_[i] |= w_[i - 1] >> 60;
    }
    return r;
  }

  std::array<std::uint64_t, kLimbs> w_{};
};

// 2^exponent for fractional exponents, truncated to the ring. Feeds the
// log-uniform shortcut sampler; exact powers for integral exponents >= 52.
inline NodeId pow2_fractional(double exponent, unsigned bits) {
  if (exponent < 0) return NodeId{};
  if (exponent >= static_cast<double>(bits)) exponent = static_cast<double>(bits) - 1e-9;
  int shift = static_cast<int>(exponent) - 52;
  double mant = exponent - static_cast<double>(static_cast<int>(exponent));
  // mantissa = 2^52 * 2^mant, an integer in [2^52, 2^53)
  auto m = static_cast<std::uint64_t>(0x1.0p52 * std::pow(2.0, mant));
  NodeId id = NodeId::from_u64(m);
  while (shift > 0) {
    id = ring_add(id, id, bits);
    --shift;
  }
  while (shift < 0) {
    id = NodeId::from_u64(id.low64() >> 1);
    ++shift;
  }
  return id.masked(bits);
}

inline NodeId random_node_id(util::DetRng& rng, unsigned bits) {
  util::Bytes raw(20);
  for (int i = 0; i < 20; i += 8) {
    const std::uint64_t v = rng.next_u64();
    for (int j = 0; j < 8 && i + j < 20; ++j) raw[static_cast<std::size_t>(i + j)] = static_cast<std::byte>((v >> (8 * j)) & 0xff);
  }
  return NodeId::from_bytes(std::span<const std::byte, 20>(raw.data(), 20)).masked(bits);
}

// Ring placement of an arbitrary key (e.g. a virtual address).
inline NodeId hash_to_ring(std::span<const std::byte> key, unsigned bits) {
  const auto digest = util::mock_digest(key);
  return NodeId::from_bytes(std::span<const std::byte, 20>(digest.data(), 20)).masked(bits);
}

inline NodeId hash_to_ring(std::string_view key, unsigned bits) {
  return hash_to_ring(std::as_bytes(std::span(key.data(), key.size())), bits);
}

}  // namespace archer::overlay
