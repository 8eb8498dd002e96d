#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>

#include "archer/overlay/node_id.hpp"
#include "archer/util/bytes.hpp"

namespace archer::secnet {

// Production primitives: Ed25519 signatures, X25519 agreement on the
// converted keys, XChaCha20-Poly1305 sealing. Session keys are bound to the
// ordered (source, destination) pair, so each direction is its own stream.
struct SodiumSuite {
  using PublicKey = std::array<std::byte, crypto_sign_PUBLICKEYBYTES>;
  using SecretKey = std::array<std::byte, crypto_sign_SECRETKEYBYTES>;
  using Signature = std::array<std::byte, crypto_sign_BYTES>;
  using SessionKey = std::array<std::byte, crypto_generichash_BYTES>;

  struct KeyPair {
    PublicKey public_key;
    SecretKey secret_key;
  };

  static const char* name() { return "sodium"; }

  static void init() {
    static std::once_flag once;
    std::call_once(once, [] {
      if (sodium_init() < 0) throw std::runtime_error("libsodium initialization failed");
    });
  }

  static KeyPair keypair_from_seed(std::span<const std::byte, 32> seed) {
    init();
    KeyPair kp;
    crypto_sign_seed_keypair(as_u8(kp.public_key.data()), as_u8(kp.secret_key.data()),
                             as_u8_const(seed.data()));
    return kp;
  }

  static Signature sign(const SecretKey& sk, std::span<const std::byte> msg) {
    init();
    Signature sig;
    crypto_sign_detached(as_u8(sig.data()), nullptr, as_u8_const(msg.data()), msg.size(),
                         as_u8_const(sk.data()));
    return sig;
  }

  static bool verify(const PublicKey& pk, std::span<const std::byte> msg, const Signature& sig) {
    init();
    return crypto_sign_verify_detached(as_u8_const(sig.data()), as_u8_const(msg.data()), msg.size(),
                                       as_u8_const(pk.data())) == 0;
  }

  // X25519 agreement over the converted Ed25519 keys, then a hash binding the
  // shared secret to the ordered endpoints. Both ends derive the same key for
  // the same (src, dst) direction.
  static SessionKey derive_session(const SecretKey& my_sk, const PublicKey& peer_pk,
                                   const archer::overlay::NodeId& src, const archer::overlay::NodeId& dst) {
    init();
    std::array<unsigned char, crypto_scalarmult_curve25519_BYTES> my_x_sk;
    std::array<unsigned char, crypto_scalarmult_curve25519_BYTES> peer_x_pk;
    std::array<unsigned char, crypto_scalarmult_curve25519_BYTES> shared;
    if (crypto_sign_ed25519_sk_to_curve25519(my_x_sk.data(), as_u8_const(my_sk.data())) != 0 ||
        crypto_sign_ed25519_pk_to_curve25519(peer_x_pk.data(), as_u8_const(peer_pk.data())) != 0 ||
        crypto_scalarmult(shared.data(), my_x_sk.data(), peer_x_pk.data()) != 0) {
      throw std::runtime_error("key agreement failed");
    }

    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, crypto_generichash_BYTES);
    crypto_generichash_update(&st, shared.data(), shared.size());
    const auto src_b = src.to_bytes();
    const auto dst_b = dst.to_bytes();
    crypto_generichash_update(&st, as_u8_const(src_b.data()), src_b.size());
    crypto_generichash_update(&st, as_u8_const(dst_b.data()), dst_b.size());
    SessionKey key;
    crypto_generichash_final(&st, as_u8(key.data()), key.size());
    return key;
  }

  static util::Bytes aead_seal(const SessionKey& key, std::uint64_t seq, std::span<const std::byte> plaintext,
                               std::span<const std::byte> aad) {
    init();
    util::Bytes out(plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
    const auto nonce = nonce_for(seq);
    unsigned long long out_len = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(
        as_u8(out.data()), &out_len, as_u8_const(plaintext.data()), plaintext.size(),
        as_u8_const(aad.data()), aad.size(), nullptr, nonce.data(), as_u8_const(key.data()));
    out.resize(out_len);
    return out;
  }

  static std::optional<util::Bytes> aead_open(const SessionKey& key, std::uint64_t seq,
                                              std::span<const std::byte> ciphertext,
                                              std::span<const std::byte> aad) {
    init();
    if (ciphertext.size() < crypto_aead_xchacha20poly1305_ietf_ABYTES) return std::nullopt;
    util::Bytes out(ciphertext.size() - crypto_aead_xchacha20poly1305_ietf_ABYTES);
    const auto nonce = nonce_for(seq);
    unsigned long long out_len = 0;
    if (crypto_aead_xchacha20poly1305_ietf_decrypt(as_u8(out.data()), &out_len, nullptr,
                                                   as_u8_const(ciphertext.data()), ciphertext.size(),
                                                   as_u8_const(aad.data()), aad.size(), nonce.data(),
                                                   as_u8_const(key.data())) != 0) {
      return std::nullopt;
    }
    out.resize(out_len);
    return out;
  }

 private:
  static std::array<unsigned char, crypto_aead_xchacha20poly1305_ietf_NPUBBYTES> nonce_for(std::uint64_t seq) {
    std::array<unsigned char, crypto_aead_xchacha20poly1305_ietf_NPUBBYTES> nonce{};
    for (int i = 0; i < 8; ++i) nonce[static_cast<std::size_t>(23 - i)] = static_cast<unsigned char>((seq >> (8 * i)) & 0xff);
    return nonce;
  }

  static unsigned char* as_u8(std::byte* p) { return reinterpret_cast<unsigned char*>(p); }
  static const unsigned char* as_u8_const(const std::byte* p) {
    return reinterpret_cast<const unsigned char*>(p);
  }
  static unsigned char* as_u8(unsigned char* p) { return p; }
  static const unsigned char* as_u8_const(const unsigned char* p) { return p; }
};

}  // namespace archer::secnet
