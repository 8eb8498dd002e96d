#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "archer/overlay/node_id.hpp"
#include "archer/util/bytes.hpp"
#include "archer/util/hash.hpp"

namespace archer::secnet {

// Deterministic stand-in with the same interface shape as the sodium suite.
// NOT cryptography: signatures are keyed hashes and the cipher is a splitmix
// keystream. Exists so routing tests can run thousands of nodes cheaply while
// still exercising the certificate and channel state machines.
struct MockSuite {
  using PublicKey = std::array<std::byte, 32>;
  using SecretKey = std::array<std::byte, 32>;
  using Signature = std::array<std::byte, 32>;
  using SessionKey = std::array<std::byte, 32>;

  struct KeyPair {
    PublicKey public_key;
    SecretKey secret_key;
  };

  static const char* name() { return "mock"; }

  static KeyPair keypair_from_seed(std::span<const std::byte, 32> seed) {
    KeyPair kp;
    std::copy(seed.begin(), seed.end(), kp.secret_key.begin());
    kp.public_key = util::mock_digest(kp.secret_key);
    return kp;
  }

  static Signature sign(const SecretKey& sk, std::span<const std::byte> msg) {
    return tagged_digest(util::mock_digest(sk), 0x5167u, msg);
  }

  static bool verify(const PublicKey& pk, std::span<const std::byte> msg, const Signature& sig) {
    return sig == tagged_digest(pk, 0x5167u, msg);
  }

  static SessionKey derive_session(const SecretKey& my_sk, const PublicKey& peer_pk,
                                   const archer::overlay::NodeId& src, const archer::overlay::NodeId& dst) {
    const PublicKey my_pk = util::mock_digest(my_sk);
    const PublicKey& lo = my_pk < peer_pk ? my_pk : peer_pk;
    const PublicKey& hi = my_pk < peer_pk ? peer_pk : my_pk;
    util::Bytes material;
    material.insert(material.end(), lo.begin(), lo.end());
    material.insert(material.end(), hi.begin(), hi.end());
    const auto src_b = src.to_bytes();
    const auto dst_b = dst.to_bytes();
    material.insert(material.end(), src_b.begin(), src_b.end());
    material.insert(material.end(), dst_b.begin(), dst_b.end());
    return util::mock_digest(material);
  }

  static util::Bytes aead_seal(const SessionKey& key, std::uint64_t seq, std::span<const std::byte> plaintext,
                               std::span<const std::byte> aad) {
    util::Bytes out(plaintext.size() + kTagSize);
    keystream_xor(key, seq, plaintext, out.data());
    const auto tag = compute_tag(key, seq, {out.data(), plaintext.size()}, aad);
    std::copy(tag.begin(), tag.begin() + kTagSize, out.begin() + static_cast<std::ptrdiff_t>(plaintext.size()));
    return out;
  }

  static std::optional<util::Bytes> aead_open(const SessionKey& key, std::uint64_t seq,
                                              std::span<const std::byte> ciphertext,
                                              std::span<const std::byte> aad) {
    if (ciphertext.size() < kTagSize) return std::nullopt;
    const std::size_t body = ciphertext.size() - kTagSize;
    const auto tag = compute_tag(key, seq, ciphertext.subspan(0, body), aad);
    for (std::size_t i = 0; i < kTagSize; ++i) {
      if (ciphertext[body + i] != tag[i]) return std::nullopt;
    }
    util::Bytes out(body);
    keystream_xor(key, seq, ciphertext.subspan(0, body), out.data());
    return out;
  }

 private:
  static constexpr std::size_t kTagSize = 16;

  static Signature tagged_digest(const PublicKey& pk, std::uint32_t domain, std::span<const std::byte> msg) {
    util::Bytes material;
    material.reserve(pk.size() + 4 + msg.size());
    material.insert(material.end(), pk.begin(), pk.end());
    util::put_u32_be(material, domain);
    material.insert(material.end(), msg.begin(), msg.end());
    return util::mock_digest(material);
  }

  static void keystream_xor(const SessionKey& key, std::uint64_t seq, std::span<const std::byte> in,
                            std::byte* out) {
    std::uint64_t state = util::fnv1a64(key) ^ (seq * 0x9e3779b97f4a7c15ULL);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (i % 8 == 0) word = util::splitmix64(state);
      out[i] = in[i] ^ static_cast<std::byte>((word >> (8 * (i % 8))) & 0xff);
    }
  }

  static std::array<std::byte, 32> compute_tag(const SessionKey& key, std::uint64_t seq,
                                               std::span<const std::byte> body, std::span<const std::byte> aad) {
    util::Bytes material;
    material.reserve(key.size() + 8 + 8 + aad.size() + body.size());
    material.insert(material.end(), key.begin(), key.end());
    util::put_u64_be(material, seq);
    util::put_u64_be(material, aad.size());
    material.insert(material.end(), aad.begin(), aad.end());
    material.insert(material.end(), body.begin(), body.end());
    return util::mock_digest(material);
  }
};

}  // namespace archer::secnet
