#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <span>

#include "archer/overlay/node_id.hpp"
#include "archer/util/bytes.hpp"

namespace archer::secnet {

// Cryptographic primitive bundle. The overlay and channel code are templated
// on a suite so the default build binds vetted primitives while large-scale
// routing tests can bind a cheap deterministic mock.
template <typename S>
concept SecuritySuite = requires(typename S::PublicKey pk, typename S::SecretKey sk,
                                 typename S::Signature sig, typename S::SessionKey key,
                                 std::span<const std::byte, 32> seed, std::span<const std::byte> msg,
                                 const archer::overlay::NodeId& id, std::uint64_t seq) {
  { S::name() } -> std::convertible_to<const char*>;
  { S::keypair_from_seed(seed) } -> std::same_as<typename S::KeyPair>;
  { S::sign(sk, msg) } -> std::same_as<typename S::Signature>;
  { S::verify(pk, msg, sig) } -> std::same_as<bool>;
  { S::derive_session(sk, pk, id, id) } -> std::same_as<typename S::SessionKey>;
  { S::aead_seal(key, seq, msg, msg) } -> std::same_as<archer::util::Bytes>;
  { S::aead_open(key, seq, msg, msg) } -> std::same_as<std::optional<archer::util::Bytes>>;
};

}  // namespace archer::secnet
