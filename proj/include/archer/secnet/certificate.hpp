#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "archer/overlay/node_id.hpp"
#include "archer/secnet/errors.hpp"
#include "archer/secnet/suite.hpp"
#include "archer/util/bytes.hpp"

namespace archer::secnet {

template <SecuritySuite S>
struct Identity {
  overlay::NodeId node_id;
  typename S::PublicKey public_key;
  typename S::SecretKey secret_key;

  static Identity from_seed(const overlay::NodeId& id, std::span<const std::byte, 32> seed) {
    const auto kp = S::keypair_from_seed(seed);
    return Identity{id, kp.public_key, kp.secret_key};
  }
};

// Canonical binary layout (see docs/certificate-format.md):
//   u8 version | 20B subject id | u16 keylen | key | u64 expiry |
//   u8 issuer len | issuer | u16 siglen | signature
// Multi-byte integers big-endian; the signature covers every byte before it.
template <SecuritySuite S>
struct Certificate {
  static constexpr std::uint8_t kVersion = 1;

  overlay::NodeId subject;
  typename S::PublicKey subject_key{};
  std::uint64_t expiry = 0;  // seconds; certificate valid while now < expiry
  std::string issuer;
  typename S::Signature signature{};

  util::Bytes to_be_signed() const {
    if (issuer.size() > 255) throw std::length_error("certificate issuer label exceeds 255 bytes");
    util::Bytes out;
    out.push_back(static_cast<std::byte>(kVersion));
    const auto id = subject.to_bytes();
    out.insert(out.end(), id.begin(), id.end());
    util::put_u16_be(out, static_cast<std::uint16_t>(subject_key.size()));
    out.insert(out.end(), subject_key.begin(), subject_key.end());
    util::put_u64_be(out, expiry);
    out.push_back(static_cast<std::byte>(issuer.size()));
    for (char c : issuer) out.push_back(static_cast<std::byte>(c));
    return out;
  }

  util::Bytes serialize() const {
    util::Bytes out = to_be_signed();
    util::put_u16_be(out, static_cast<std::uint16_t>(signature.size()));
    out.insert(out.end(), signature.begin(), signature.end());
    return out;
  }

  static std::optional<Certificate> parse(std::span<const std::byte> data) {
    util::ByteReader r(data);
    Certificate cert;
    if (r.u8() != kVersion) return std::nullopt;
    const auto id_raw = r.raw(20);
    if (!r.ok()) return std::nullopt;
    cert.subject = overlay::NodeId::from_bytes(std::span<const std::byte, 20>(id_raw.data(), 20));
    const std::uint16_t keylen = r.u16_be();
    if (keylen != cert.subject_key.size()) return std::nullopt;
    const auto key_raw = r.raw(keylen);
    if (!r.ok()) return std::nullopt;
    std::copy(key_raw.begin(), key_raw.end(), cert.subject_key.begin());
    cert.expiry = r.u64_be();
    const std::uint8_t issuer_len = r.u8();
    const auto issuer_raw = r.raw(issuer_len);
    if (!r.ok()) return std::nullopt;
    for (std::byte b : issuer_raw) cert.issuer.push_back(static_cast<char>(std::to_integer<unsigned char>(b)));
    const std::uint16_t siglen = r.u16_be();
    if (siglen != cert.signature.size()) return std::nullopt;
    const auto sig_raw = r.raw(siglen);
    if (!r.ok() || !r.at_end()) return std::nullopt;
    std::copy(sig_raw.begin(), sig_raw.end(), cert.signature.begin());
    return cert;
  }
};

template <SecuritySuite S>
Certificate<S> issue_certificate(const Identity<S>& ca, const typename S::PublicKey& subject_key,
                                 const overlay::NodeId& subject_id, std::uint64_t expiry,
                                 const std::string& issuer_label = "archer-ca") {
  Certificate<S> cert;
  cert.subject = subject_id;
  cert.subject_key = subject_key;
  cert.expiry = expiry;
  cert.issuer = issuer_label;
  cert.signature = S::sign(ca.secret_key, cert.to_be_signed());
  return cert;
}

template <SecuritySuite S>
bool verify_certificate(const typename S::PublicKey& ca_public_key, const Certificate<S>& cert,
                        std::uint64_t now) {
  if (now >= cert.expiry) return false;
  return S::verify(ca_public_key, cert.to_be_signed(), cert.signature);
}

// Wire-format entry point: malformed bytes are a verification failure, not an error.
template <SecuritySuite S>
bool verify_certificate_bytes(const typename S::PublicKey& ca_public_key,
                              std::span<const std::byte> data, std::uint64_t now) {
  const auto cert = Certificate<S>::parse(data);
  return cert && verify_certificate<S>(ca_public_key, *cert, now);
}

}  // namespace archer::secnet
