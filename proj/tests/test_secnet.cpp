#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <set>
#include <string>
#include <vector>

#include "archer/overlay/network.hpp"
#include "archer/secnet/certificate.hpp"
#include "archer/secnet/channel.hpp"
#include "archer/secnet/mock_suite.hpp"
#include "archer/secnet/sodium_suite.hpp"
#include "archer/util/rng.hpp"

using namespace archer;
using overlay::NodeId;
using secnet::Certificate;
using secnet::Identity;
using secnet::MockSuite;
using secnet::SecnetErrc;
using secnet::SecnetError;
using secnet::SodiumSuite;

namespace {

std::array<std::byte, 32> seed_bytes(std::uint64_t label) {
  util::DetRng rng(label);
  std::array<std::byte, 32> seed;
  for (int i = 0; i < 4; ++i) {
    const std::uint64_t v = rng.next_u64();
    for (int j = 0; j < 8; ++j) seed[static_cast<std::size_t>(i * 8 + j)] = static_cast<std::byte>((v >> (8 * j)) & 0xff);
  }
  return seed;
}

template <typename S>
Identity<S> make_identity(std::uint64_t id, std::uint64_t seed_label) {
  return Identity<S>::from_seed(NodeId::from_u64(id), seed_bytes(seed_label));
}

util::Bytes random_bytes(util::DetRng& rng, std::size_t n) {
  util::Bytes out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::byte>(rng.next_below(256));
  return out;
}

}  // namespace

TEMPLATE_TEST_CASE("certificate issue and verify round-trip", "", SodiumSuite, MockSuite) {
  using S = TestType;
  const auto ca = make_identity<S>(1, 100);
  const auto other_ca = make_identity<S>(2, 200);
  const auto subject = make_identity<S>(50, 300);

  const auto cert = secnet::issue_certificate<S>(ca, subject.public_key, subject.node_id, 1000);
  CHECK(secnet::verify_certificate<S>(ca.public_key, cert, 10));
  CHECK_FALSE(secnet::verify_certificate<S>(other_ca.public_key, cert, 10));

  const auto expired = secnet::issue_certificate<S>(ca, subject.public_key, subject.node_id, 5);
  CHECK_FALSE(secnet::verify_certificate<S>(ca.public_key, expired, 10));
  CHECK(secnet::verify_certificate<S>(ca.public_key, expired, 4));
}

TEST_CASE("certificate serialization follows the documented layout") {
  using S = MockSuite;  // 32-byte keys and signatures keep offsets readable
  const auto ca = make_identity<S>(1, 1);
  const auto subject = make_identity<S>(7, 2);
  const auto cert = secnet::issue_certificate<S>(ca, subject.public_key, subject.node_id, 0x0102030405060708ULL, "ca-x");

  const auto wire = cert.serialize();
  // version | id | keylen | key | expiry | issuer_len | issuer | siglen | sig
  REQUIRE(wire.size() == 1 + 20 + 2 + 32 + 8 + 1 + 4 + 2 + 32);
  CHECK(wire[0] == std::byte{1});
  CHECK(util::to_hex(std::span<const std::byte>(wire.data() + 1, 20)) == cert.subject.to_hex());
  CHECK(wire[21] == std::byte{0});
  CHECK(wire[22] == std::byte{32});
  CHECK(util::to_hex(std::span<const std::byte>(wire.data() + 55, 8)) == "0102030405060708");
  CHECK(wire[63] == std::byte{4});
  CHECK(static_cast<char>(wire[64]) == 'c');
  CHECK(static_cast<char>(wire[67]) == 'x');

  const auto parsed = Certificate<S>::parse(wire);
  REQUIRE(parsed.has_value());
  CHECK(parsed->subject == cert.subject);
  CHECK(parsed->subject_key == cert.subject_key);
  CHECK(parsed->expiry == cert.expiry);
  CHECK(parsed->issuer == cert.issuer);
  CHECK(parsed->signature == cert.signature);
  CHECK(parsed->serialize() == wire);
}

TEST_CASE("malformed certificate bytes never verify") {
  using S = SodiumSuite;
  const auto ca = make_identity<S>(1, 11);
  const auto subject = make_identity<S>(9, 12);
  const auto cert = secnet::issue_certificate<S>(ca, subject.public_key, subject.node_id, 500);
  const auto wire = cert.serialize();

  REQUIRE(secnet::verify_certificate_bytes<S>(ca.public_key, wire, 100));
  for (std::size_t cut = 0; cut < wire.size(); cut += 7) {
    CHECK_FALSE(secnet::verify_certificate_bytes<S>(ca.public_key, std::span<const std::byte>(wire.data(), cut), 100));
  }
  auto padded = wire;
  padded.push_back(std::byte{0});
  CHECK_FALSE(secnet::verify_certificate_bytes<S>(ca.public_key, padded, 100));
  CHECK_FALSE(secnet::verify_certificate_bytes<S>(ca.public_key, {}, 100));
}

TEST_CASE("every single-bit flip of a certificate breaks verification") {
  using S = SodiumSuite;
  const auto ca = make_identity<S>(1, 21);
  const auto subject = make_identity<S>(3, 22);
  const auto cert = secnet::issue_certificate<S>(ca, subject.public_key, subject.node_id, 500, "ca");
  const auto wire = cert.serialize();
  REQUIRE(secnet::verify_certificate_bytes<S>(ca.public_key, wire, 100));

  std::size_t still_valid = 0;
  for (std::size_t i = 0; i < wire.size(); ++i) {
    for (int bit = 0; bit < 8; ++bit) {
      auto damaged = wire;
      damaged[i] ^= static_cast<std::byte>(1 << bit);
      if (secnet::verify_certificate_bytes<S>(ca.public_key, damaged, 100)) ++still_valid;
    }
  }
  CHECK(still_valid == 0);
}

TEMPLATE_TEST_CASE("channel establishment agrees on both ends", "", SodiumSuite, MockSuite) {
  using S = TestType;
  const auto ca = make_identity<S>(1, 31);
  const auto a = make_identity<S>(10, 32);
  const auto b = make_identity<S>(20, 33);
  const auto cert_a = secnet::issue_certificate<S>(ca, a.public_key, a.node_id, 1000);
  const auto cert_b = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 1000);

  const auto sender = secnet::establish_channel_endpoint<S>(a, cert_a, cert_b, ca.public_key, 0, true);
  const auto receiver = secnet::establish_channel_endpoint<S>(b, cert_b, cert_a, ca.public_key, 0, false);
  CHECK(sender.session_key == receiver.session_key);
  CHECK(sender.peer_a == a.node_id);
  CHECK(sender.peer_b == b.node_id);

  const auto combined = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
  CHECK(combined.session_key == sender.session_key);
}

TEST_CASE("channel establishment rejects bad certificates") {
  using S = SodiumSuite;
  const auto ca = make_identity<S>(1, 41);
  const auto a = make_identity<S>(10, 42);
  const auto b = make_identity<S>(20, 43);
  const auto cert_a = secnet::issue_certificate<S>(ca, a.public_key, a.node_id, 1000);
  const auto cert_b = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 1000);

  SECTION("expired peer certificate") {
    const auto stale = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 5);
    CHECK_THROWS_AS(secnet::establish_channel<S>(a, cert_a, b, stale, ca.public_key, 10), SecnetError);
  }

  SECTION("certificate subject differs from claimed identity") {
    CHECK_THROWS_AS(secnet::establish_channel<S>(a, cert_b, b, cert_a, ca.public_key, 0), SecnetError);
  }

  SECTION("attacker substitutes its own key without a CA signature") {
    const auto mallory = make_identity<S>(66, 44);
    // self-issued certificate: right shape, wrong trust root
    const auto forged = secnet::issue_certificate<S>(mallory, mallory.public_key, b.node_id, 1000);
    bool rejected = false;
    try {
      secnet::establish_channel_endpoint<S>(a, cert_a, forged, ca.public_key, 0, true);
    } catch (const SecnetError& e) {
      rejected = e.code() == SecnetErrc::certificate_invalid;
    }
    CHECK(rejected);
  }

  SECTION("attacker splices its key into a genuine certificate") {
    const auto mallory = make_identity<S>(66, 45);
    auto spliced = cert_b;
    spliced.subject_key = mallory.public_key;
    CHECK_FALSE(secnet::verify_certificate<S>(ca.public_key, spliced, 0));
    CHECK_THROWS_AS(secnet::establish_channel_endpoint<S>(a, cert_a, spliced, ca.public_key, 0, true), SecnetError);
  }
}

TEMPLATE_TEST_CASE("seal and open round-trip across sizes", "", SodiumSuite, MockSuite) {
  using S = TestType;
  const auto ca = make_identity<S>(1, 51);
  const auto a = make_identity<S>(10, 52);
  const auto b = make_identity<S>(20, 53);
  const auto cert_a = secnet::issue_certificate<S>(ca, a.public_key, a.node_id, 1000);
  const auto cert_b = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 1000);
  auto tx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
  auto rx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);

  util::DetRng rng(6);
  for (const std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{2}, std::size_t{15}, std::size_t{16},
                              std::size_t{17}, std::size_t{63}, std::size_t{64}, std::size_t{65},
                              std::size_t{1023}, std::size_t{4096}, std::size_t{65536}}) {
    const auto msg = random_bytes(rng, n);
    const auto sealed = secnet::seal(tx, msg);
    CHECK(sealed.size() > msg.size());  // length plus header and tag only
    const auto back = secnet::open(rx, sealed);
    REQUIRE(back == msg);
  }
  CHECK(tx.send_counter == 12);
  CHECK(rx.recv_counter == 12);
}

TEST_CASE("replay and reorder are rejected by counters") {
  using S = SodiumSuite;
  const auto ca = make_identity<S>(1, 61);
  const auto a = make_identity<S>(10, 62);
  const auto b = make_identity<S>(20, 63);
  const auto cert_a = secnet::issue_certificate<S>(ca, a.public_key, a.node_id, 1000);
  const auto cert_b = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 1000);
  auto tx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
  auto rx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);

  const auto first = secnet::seal(tx, util::to_bytes("one"));
  const auto second = secnet::seal(tx, util::to_bytes("two"));

  SECTION("same ciphertext twice") {
    CHECK(secnet::open(rx, first) == util::to_bytes("one"));
    bool replay = false;
    try {
      secnet::open(rx, first);
    } catch (const SecnetError& e) {
      replay = e.code() == SecnetErrc::replay_detected;
    }
    CHECK(replay);
  }

  SECTION("second record before the first") {
    CHECK_THROWS_AS(secnet::open(rx, second), SecnetError);
    // the gap rejection must not advance the counter
    CHECK(secnet::open(rx, first) == util::to_bytes("one"));
    CHECK(secnet::open(rx, second) == util::to_bytes("two"));
  }

  SECTION("empty message round-trips") {
    auto tx2 = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
    auto rx2 = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
    const auto sealed = secnet::seal(tx2, {});
    CHECK(secnet::open(rx2, sealed).empty());
  }
}

TEMPLATE_TEST_CASE("every ciphertext bit flip fails authentication", "", SodiumSuite, MockSuite) {
  using S = TestType;
  const auto ca = make_identity<S>(1, 71);
  const auto a = make_identity<S>(10, 72);
  const auto b = make_identity<S>(20, 73);
  const auto cert_a = secnet::issue_certificate<S>(ca, a.public_key, a.node_id, 1000);
  const auto cert_b = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 1000);
  auto tx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);

  const auto sealed = secnet::seal(tx, util::to_bytes("hello"));
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < sealed.size(); ++i) {
    for (int bit = 0; bit < 8; ++bit) {
      auto damaged = sealed;
      damaged[i] ^= static_cast<std::byte>(1 << bit);
      auto rx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
      try {
        secnet::open(rx, damaged);
        ++accepted;
      } catch (const SecnetError&) {
      }
    }
  }
  CHECK(accepted == 0);

  auto rx = secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0);
  CHECK_THROWS_AS(secnet::open(rx, std::span<const std::byte>(sealed.data(), 4)), SecnetError);
}

TEMPLATE_TEST_CASE("session keys differ across pairs and directions", "", SodiumSuite, MockSuite) {
  using S = TestType;
  const auto ca = make_identity<S>(1, 81);
  const auto a = make_identity<S>(10, 82);
  const auto b = make_identity<S>(20, 83);
  const auto c = make_identity<S>(30, 84);
  const auto cert_a = secnet::issue_certificate<S>(ca, a.public_key, a.node_id, 1000);
  const auto cert_b = secnet::issue_certificate<S>(ca, b.public_key, b.node_id, 1000);
  const auto cert_c = secnet::issue_certificate<S>(ca, c.public_key, c.node_id, 1000);

  std::vector<typename S::SessionKey> keys;
  keys.push_back(secnet::establish_channel<S>(a, cert_a, b, cert_b, ca.public_key, 0).session_key);
  keys.push_back(secnet::establish_channel<S>(b, cert_b, a, cert_a, ca.public_key, 0).session_key);
  keys.push_back(secnet::establish_channel<S>(a, cert_a, c, cert_c, ca.public_key, 0).session_key);
  keys.push_back(secnet::establish_channel<S>(b, cert_b, c, cert_c, ca.public_key, 0).session_key);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = i + 1; j < keys.size(); ++j) {
      CHECK(keys[i] != keys[j]);
    }
  }
}

namespace {

// Taps every frame that crosses the wire so tests can replay captures.
struct RecordingTransport : overlay::InMemoryTransport {
  std::vector<std::pair<NodeId, util::Bytes>> log;

  void send(const NodeId& to, util::Bytes frame) override {
    log.emplace_back(to, frame);
    InMemoryTransport::send(to, std::move(frame));
  }
};

}  // namespace

TEST_CASE("confinement: uncertified or tampered frames are always dropped") {
  using Net = overlay::Network<SodiumSuite>;
  RecordingTransport tap;
  Net::Config cfg;
  cfg.ring_bits = 16;
  cfg.seed = 2718;
  Net net(cfg, &tap);

  std::vector<NodeId> ids;
  for (int i = 0; i < 8; ++i) {
    overlay::NodeSpec spec;
    spec.nat = i % 3 == 0 ? overlay::NatClass::Symmetric : overlay::NatClass::Public;
    if (ids.empty()) {
      ids.push_back(net.join(spec));
    } else {
      ids.push_back(net.join(spec, std::span<const NodeId>(&ids[0], 1)));
    }
  }
  net.stabilize();

  // Legitimate traffic, captured on the wire.
  util::DetRng rng(13);
  for (int i = 0; i < 60; ++i) {
    const NodeId src = ids[rng.next_below(ids.size())];
    NodeId dst = src;
    while (dst == src) dst = ids[rng.next_below(ids.size())];
    REQUIRE(net.tunnel_send(src, net.vip_of(dst), util::to_bytes("payload")).delivered);
  }
  const auto captured = tap.log;
  REQUIRE_FALSE(captured.empty());

  std::uint64_t attempts = 0;

  SECTION("fuzzed garbage, forged senders, stolen certificates, wire replays") {
    // 1) random garbage bytes
    for (int i = 0; i < 400; ++i) {
      const auto junk = random_bytes(rng, rng.next_below(300));
      const auto report = net.inject_frame(ids[rng.next_below(ids.size())], junk);
      CHECK_FALSE(report.delivered);
      ++attempts;
    }

    // 2) well-formed frames from a sender without a CA-issued certificate
    const auto mallory = make_identity<SodiumSuite>(0xbad, 999);
    const auto self_signed = secnet::issue_certificate<SodiumSuite>(mallory, mallory.public_key, mallory.node_id, 1'000'000);
    for (int i = 0; i < 300; ++i) {
      const NodeId target = ids[rng.next_below(ids.size())];
      overlay::Frame f;
      f.nonce = 0x10000 + static_cast<std::uint64_t>(i);
      f.origin = mallory.node_id;
      f.dest = target;
      f.origin_cert = self_signed.serialize();
      f.path = {mallory.node_id};
      secnet::SecureChannel<SodiumSuite> ch;
      ch.peer_a = mallory.node_id;
      ch.peer_b = target;
      ch.session_key = SodiumSuite::derive_session(mallory.secret_key, net.certificate_of(target).subject_key,
                                                   mallory.node_id, target);
      f.sealed = secnet::seal(ch, util::to_bytes("intrusion"));
      const auto report = net.inject_frame(target, f.encode());
      CHECK_FALSE(report.delivered);
      CHECK(report.first_hop == overlay::FrameOutcome::RejectedCert);
      ++attempts;
    }

    // 3) stolen certificate (public anyway) but no private key: seal with the
    //    attacker's own key under the victim's name
    for (int i = 0; i < 200; ++i) {
      const NodeId victim = ids[rng.next_below(ids.size())];
      NodeId target = victim;
      while (target == victim) target = ids[rng.next_below(ids.size())];
      overlay::Frame f;
      f.nonce = 0x20000 + static_cast<std::uint64_t>(i);
      f.origin = victim;
      f.dest = target;
      f.origin_cert = net.certificate_of(victim).serialize();
      f.path = {victim};
      secnet::SecureChannel<SodiumSuite> ch;
      ch.peer_a = victim;
      ch.peer_b = target;
      ch.session_key = SodiumSuite::derive_session(mallory.secret_key, net.certificate_of(target).subject_key,
                                                   victim, target);
      ch.send_counter = 100 + static_cast<std::uint64_t>(i);  // plausible fresh sequence
      f.sealed = secnet::seal(ch, util::to_bytes("spoof"));
      const auto report = net.inject_frame(target, f.encode());
      CHECK_FALSE(report.delivered);
      ++attempts;
    }

    // 4) replay of genuine wire frames
    for (int i = 0; i < 100; ++i) {
      const auto& [to, bytes] = captured[rng.next_below(captured.size())];
      const auto report = net.inject_frame(to, bytes);
      CHECK_FALSE(report.delivered);
      ++attempts;
    }

    const auto stats = net.security_stats();
    CHECK(attempts == 1000);
    CHECK(stats.inject_attempts == 1000);
    CHECK(stats.inject_delivered == 0);

    // The overlay still works afterwards.
    const auto receipt = net.tunnel_send(ids[0], net.vip_of(ids[5]), util::to_bytes("still alive"));
    CHECK(receipt.delivered);
  }
}
