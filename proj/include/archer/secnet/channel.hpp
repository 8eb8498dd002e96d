#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "archer/overlay/node_id.hpp"
#include "archer/secnet/certificate.hpp"
#include "archer/secnet/errors.hpp"
#include "archer/secnet/suite.hpp"
#include "archer/util/bytes.hpp"

namespace archer::secnet {

// One-directional sealed stream from peer_a to peer_b. Each side holds its own
// replica: the sender advances send_counter, the receiver advances
// recv_counter, and the strictly-increasing sequence doubles as the AEAD nonce.
// Bidirectional traffic uses two channels with distinct session keys.
template <SecuritySuite S>
struct SecureChannel {
  overlay::NodeId peer_a;  // sender
  overlay::NodeId peer_b;  // receiver
  typename S::SessionKey session_key{};
  std::uint64_t send_counter = 0;
  std::uint64_t recv_counter = 0;
};

// Handshake as run by one endpoint: it knows its own identity and only the
// peer's certificate. Both the sender and the receiver derive the same key.
template <SecuritySuite S>
SecureChannel<S> establish_channel_endpoint(const Identity<S>& self, const Certificate<S>& self_cert,
                                            const Certificate<S>& peer_cert,
                                            const typename S::PublicKey& ca_public_key,
                                            std::uint64_t now, bool self_is_sender) {
  if (self_cert.subject != self.node_id) {
    throw SecnetError(SecnetErrc::identity_mismatch, "own certificate subject differs from claimed id");
  }
  if (!verify_certificate<S>(ca_public_key, self_cert, now)) {
    throw SecnetError(SecnetErrc::certificate_invalid, "own certificate rejected");
  }
  if (!verify_certificate<S>(ca_public_key, peer_cert, now)) {
    throw SecnetError(SecnetErrc::certificate_invalid, "peer certificate rejected");
  }
  const overlay::NodeId src = self_is_sender ? self.node_id : peer_cert.subject;
  const overlay::NodeId dst = self_is_sender ? peer_cert.subject : self.node_id;
  SecureChannel<S> ch;
  ch.peer_a = src;
  ch.peer_b = dst;
  ch.session_key = S::derive_session(self.secret_key, peer_cert.subject_key, src, dst);
  return ch;
}

// Trusted-driver form: both identities in hand, used by tests and the
// simulation network. Asserts the two endpoint derivations agree.
template <SecuritySuite S>
SecureChannel<S> establish_channel(const Identity<S>& a, const Certificate<S>& a_cert,
                                   const Identity<S>& b, const Certificate<S>& b_cert,
                                   const typename S::PublicKey& ca_public_key, std::uint64_t now) {
  if (a_cert.subject != a.node_id || b_cert.subject != b.node_id) {
    throw SecnetError(SecnetErrc::identity_mismatch, "certificate subject differs from claimed id");
  }
  const auto sender_side = establish_channel_endpoint<S>(a, a_cert, b_cert, ca_public_key, now, true);
  const auto receiver_side = establish_channel_endpoint<S>(b, b_cert, a_cert, ca_public_key, now, false);
  if (sender_side.session_key != receiver_side.session_key) {
    throw SecnetError(SecnetErrc::authentication_failed, "session key derivations disagree");
  }
  return sender_side;
}

template <SecuritySuite S>
util::Bytes channel_aad(const SecureChannel<S>& channel, std::uint64_t seq);

// Sealed record: [u64 BE sequence][AEAD ciphertext+tag]. The sequence is bound
// into the AEAD as associated data along with both peer ids.
template <SecuritySuite S>
util::Bytes seal(SecureChannel<S>& channel, std::span<const std::byte> plaintext) {
  const std::uint64_t seq = ++channel.send_counter;
  util::Bytes aad = channel_aad(channel, seq);
  util::Bytes out;
  util::put_u64_be(out, seq);
  const util::Bytes ct = S::aead_seal(channel.session_key, seq, plaintext, aad);
  out.insert(out.end(), ct.begin(), ct.end());
  return out;
}

template <SecuritySuite S>
util::Bytes open(SecureChannel<S>& channel, std::span<const std::byte> sealed) {
  if (sealed.size() < 8) throw SecnetError(SecnetErrc::malformed_frame, "sealed record shorter than header");
  util::ByteReader r(sealed);
  const std::uint64_t seq = r.u64_be();
  if (seq <= channel.recv_counter) {
    throw SecnetError(SecnetErrc::replay_detected,
                      "sequence " + std::to_string(seq) + " not above " + std::to_string(channel.recv_counter));
  }
  if (seq != channel.recv_counter + 1) {
    throw SecnetError(SecnetErrc::replay_detected, "sequence gap: expected " +
                                                       std::to_string(channel.recv_counter + 1) + ", got " +
                                                       std::to_string(seq));
  }
  const util::Bytes aad = channel_aad(channel, seq);
  auto plain = S::aead_open(channel.session_key, seq, sealed.subspan(8), aad);
  if (!plain) throw SecnetError(SecnetErrc::authentication_failed, "ciphertext failed authentication");
  channel.recv_counter = seq;
  return std::move(*plain);
}

template <SecuritySuite S>
util::Bytes channel_aad(const SecureChannel<S>& channel, std::uint64_t seq) {
  util::Bytes aad;
  const auto a = channel.peer_a.to_bytes();
  const auto b = channel.peer_b.to_bytes();
  aad.insert(aad.end(), a.begin(), a.end());
  aad.insert(aad.end(), b.begin(), b.end());
  util::put_u64_be(aad, seq);
  return aad;
}

}  // namespace archer::secnet
