#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "archer/util/bytes.hpp"

namespace archer::overlay {

// IPv4-shaped virtual address handed out by the overlay, stored host-order.
class VirtualAddress {
 public:
  constexpr VirtualAddress() = default;
  explicit constexpr VirtualAddress(std::uint32_t value) : value_(value) {}

  constexpr std::uint32_t value() const { return value_; }

  std::string to_string() const {
    std::string out;
    for (int s = 24; s >= 0; s -= 8) {
      out += std::to_string((value_ >> s) & 0xff);
      if (s > 0) out += '.';
    }
    return out;
  }

  static std::optional<VirtualAddress> parse(std::string_view s) {
    std::uint32_t value = 0;
    int octets = 0;
    std::size_t i = 0;
    while (octets < 4) {
      if (i >= s.size() || s[i] < '0' || s[i] > '9') return std::nullopt;
      std::uint32_t octet = 0;
      std::size_t digits = 0;
      while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
        octet = octet * 10 + static_cast<std::uint32_t>(s[i] - '0');
        if (octet > 255 || ++digits > 3) return std::nullopt;
        ++i;
      }
      value = (value << 8) | octet;
      ++octets;
      if (octets < 4) {
        if (i >= s.size() || s[i] != '.') return std::nullopt;
        ++i;
      }
    }
    if (i != s.size()) return std::nullopt;
    return VirtualAddress(value);
  }

  util::Bytes to_key() const {
    util::Bytes out;
    util::put_u32_be(out, value_);
    return out;
  }

  friend constexpr bool operator==(VirtualAddress, VirtualAddress) = default;
  friend constexpr auto operator<=>(VirtualAddress, VirtualAddress) = default;

 private:
  std::uint32_t value_ = 0;
};

// Address pool such as 10.128.0.0/9; addresses are handed out sequentially.
struct VipPrefix {
  std::uint32_t base = 0;
  unsigned prefix_len = 0;

  static std::optional<VipPrefix> parse(std::string_view s) {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    const auto addr = VirtualAddress::parse(s.substr(0, slash));
    if (!addr) return std::nullopt;
    unsigned len = 0;
    const auto tail = s.substr(slash + 1);
    if (tail.empty() || tail.size() > 2) return std::nullopt;
    for (char c : tail) {
      if (c < '0' || c > '9') return std::nullopt;
      len = len * 10 + static_cast<unsigned>(c - '0');
    }
    if (len < 1 || len > 30) return std::nullopt;
    VipPrefix p;
    p.prefix_len = len;
    p.base = addr->value() & mask_for(len);
    return p;
  }

  static constexpr std::uint32_t mask_for(unsigned len) {
    return len == 0 ? 0 : ~std::uint32_t{0} << (32 - len);
  }

  constexpr bool contains(VirtualAddress a) const {
    return (a.value() & mask_for(prefix_len)) == base;
  }

  constexpr std::uint64_t capacity() const { return std::uint64_t{1} << (32 - prefix_len); }

  constexpr VirtualAddress at(std::uint64_t offset) const {
    return VirtualAddress(base + static_cast<std::uint32_t>(offset % capacity()));
  }

  std::string to_string() const {
    return VirtualAddress(base).to_string() + "/" + std::to_string(prefix_len);
  }
};

}  // namespace archer::overlay
