#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "archer/overlay/node_id.hpp"
#include "archer/util/bytes.hpp"

namespace archer::overlay {

// Wire format of a tunneled data frame. Relays never touch the sealed body;
// they verify the origin certificate, append themselves to the path, and
// forward. All integers big-endian.
//
//   u8 version | u8 type | u64 nonce | 20B origin | 20B dest |
//   u16 cert len | cert | u16 path len | 20B per entry |
//   u32 sealed len | sealed record
struct Frame {
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::uint8_t kTypeData = 1;
  static constexpr std::size_t kMaxPath = 2048;

  std::uint8_t type = kTypeData;
  std::uint64_t nonce = 0;
  NodeId origin;
  NodeId dest;
  util::Bytes origin_cert;
  std::vector<NodeId> path;
  util::Bytes sealed;

  util::Bytes encode() const {
    util::Bytes out;
    out.reserve(2 + 8 + 40 + 2 + origin_cert.size() + 2 + path.size() * 20 + 4 + sealed.size());
    out.push_back(static_cast<std::byte>(kVersion));
    out.push_back(static_cast<std::byte>(type));
    util::put_u64_be(out, nonce);
    const auto o = origin.to_bytes();
    out.insert(out.end(), o.begin(), o.end());
    const auto d = dest.to_bytes();
    out.insert(out.end(), d.begin(), d.end());
    util::put_u16_be(out, static_cast<std::uint16_t>(origin_cert.size()));
    out.insert(out.end(), origin_cert.begin(), origin_cert.end());
    util::put_u16_be(out, static_cast<std::uint16_t>(path.size()));
    for (const NodeId& id : path) {
      const auto b = id.to_bytes();
      out.insert(out.end(), b.begin(), b.end());
    }
    util::put_u32_be(out, static_cast<std::uint32_t>(sealed.size()));
    out.insert(out.end(), sealed.begin(), sealed.end());
    return out;
  }

  static std::optional<Frame> decode(std::span<const std::byte> data) {
    util::ByteReader r(data);
    Frame f;
    if (r.u8() != kVersion) return std::nullopt;
    f.type = r.u8();
    if (f.type != kTypeData) return std::nullopt;
    f.nonce = r.u64_be();
    const auto o = r.raw(20);
    const auto d = r.raw(20);
    if (!r.ok()) return std::nullopt;
    f.origin = NodeId::from_bytes(std::span<const std::byte, 20>(o.data(), 20));
    f.dest = NodeId::from_bytes(std::span<const std::byte, 20>(d.data(), 20));
    const std::uint16_t cert_len = r.u16_be();
    const auto cert = r.raw(cert_len);
    if (!r.ok()) return std::nullopt;
    f.origin_cert.assign(cert.begin(), cert.end());
    const std::uint16_t path_len = r.u16_be();
    if (path_len > kMaxPath) return std::nullopt;
    f.path.reserve(path_len);
    for (std::uint16_t i = 0; i < path_len; ++i) {
      const auto e = r.raw(20);
      if (!r.ok()) return std::nullopt;
      f.path.push_back(NodeId::from_bytes(std::span<const std::byte, 20>(e.data(), 20)));
    }
    const std::uint32_t sealed_len = r.u32_be();
    const auto body = r.raw(sealed_len);
    if (!r.ok() || !r.at_end()) return std::nullopt;
    f.sealed.assign(body.begin(), body.end());
    return f;
  }
};

}  // namespace archer::overlay
