#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace archer::util {

using Bytes = std::vector<std::byte>;

inline void put_u16_be(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v >> 8));
  out.push_back(static_cast<std::byte>(v & 0xff));
}

inline void put_u32_be(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::byte>((v >> s) & 0xff));
}

inline void put_u64_be(Bytes& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::byte>((v >> s) & 0xff));
}

// Bounds-checked big-endian reader; any read past the end poisons the cursor.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

  bool ok() const { return ok_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  std::uint8_t u8() {
    if (!take(1)) return 0;
    return static_cast<std::uint8_t>(data_[pos_ - 1]);
  }

  std::uint16_t u16_be() {
    if (!take(2)) return 0;
    std::uint16_t v = 0;
    for (std::size_t i = pos_ - 2; i < pos_; ++i) v = static_cast<std::uint16_t>((v << 8) | std::to_integer<std::uint16_t>(data_[i]));
    return v;
  }

  std::uint32_t u32_be() {
    if (!take(4)) return 0;
    std::uint32_t v = 0;
    for (std::size_t i = pos_ - 4; i < pos_; ++i) v = (v << 8) | std::to_integer<std::uint32_t>(data_[i]);
    return v;
  }

  std::uint64_t u64_be() {
    if (!take(8)) return 0;
    std::uint64_t v = 0;
    for (std::size_t i = pos_ - 8; i < pos_; ++i) v = (v << 8) | std::to_integer<std::uint64_t>(data_[i]);
    return v;
  }

  std::span<const std::byte> raw(std::size_t n) {
    if (!take(n)) return {};
    return data_.subspan(pos_ - n, n);
  }

 private:
  bool take(std::size_t n) {
    if (!ok_ || data_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

inline std::string to_hex(std::span<const std::byte> data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::byte b : data) {
    out.push_back(digits[std::to_integer<unsigned>(b) >> 4]);
    out.push_back(digits[std::to_integer<unsigned>(b) & 0xf]);
  }
  return out;
}

inline std::optional<Bytes> from_hex(std::string_view s) {
  if (s.size() % 2 != 0) return std::nullopt;
  auto nyb = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  out.reserve(s.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) {
    int hi = nyb(s[i]), lo = nyb(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::byte>((hi << 4) | lo));
  }
  return out;
}

inline Bytes to_bytes(std::string_view s) {
  Bytes out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<std::byte>(s[i]);
  return out;
}

}  // namespace archer::util
