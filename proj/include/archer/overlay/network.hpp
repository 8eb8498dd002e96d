#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/overlay/errors.hpp"
#include "archer/overlay/frame.hpp"
#include "archer/overlay/nat.hpp"
#include "archer/overlay/node_id.hpp"
#include "archer/overlay/routing_table.hpp"
#include "archer/overlay/transport.hpp"
#include "archer/overlay/virtual_address.hpp"
#include "archer/secnet/certificate.hpp"
#include "archer/secnet/channel.hpp"
#include "archer/secnet/errors.hpp"
#include "archer/secnet/suite.hpp"
#include "archer/util/rng.hpp"

namespace archer::overlay {

struct NodeDescriptor {
  NodeId id;
  VirtualAddress vip;
  std::string site;
  std::string pool;
  double speed = 1.0;
  NatClass nat = NatClass::Public;
};

struct NodeSpec {
  std::string site = "site";
  std::string pool = "pool";
  double speed = 1.0;
  NatClass nat = NatClass::Public;
};

struct DeliveryReceipt {
  bool delivered = false;
  std::string drop_reason;
  LinkKind link = LinkKind::Direct;
  std::size_t hops = 0;
  std::vector<NodeId> path;
  util::Bytes payload;
};

enum class FrameOutcome {
  Delivered,
  Forwarded,
  RejectedMalformed,
  RejectedCert,
  RejectedAuth,
  RejectedReplay,
  RejectedRouting,
  DroppedUnknownNode,
};

struct InjectReport {
  FrameOutcome first_hop = FrameOutcome::DroppedUnknownNode;
  bool delivered = false;
};

struct SecurityStats {
  std::uint64_t channels_established = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_forwarded = 0;
  std::uint64_t rejected_malformed = 0;
  std::uint64_t rejected_cert = 0;
  std::uint64_t rejected_auth = 0;
  std::uint64_t rejected_replay = 0;
  std::uint64_t rejected_routing = 0;
  std::uint64_t inject_attempts = 0;
  std::uint64_t inject_delivered = 0;
};

struct DeliveryStats {
  std::uint64_t attempted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t total_hops = 0;
  std::size_t max_hops = 0;

  double mean_hops() const { return delivered == 0 ? 0.0 : static_cast<double>(total_hops) / static_cast<double>(delivered); }
  double delivery_rate() const { return attempted == 0 ? 1.0 : static_cast<double>(delivered) / static_cast<double>(attempted); }
};

// God's-eye overlay: owns every node's state and drives joins, repair, the
// DHT registry, and the sealed data plane over a pluggable transport. The
// routing and confinement logic lives here; drivers differ only in transport.
template <secnet::SecuritySuite S>
class Network {
 public:
  struct Config {
    unsigned ring_bits = NodeId::kMaxBits;
    unsigned near_count = 2;
    int shortcut_count = -1;  // -1 = ceil(log2 N) at join time, 0 disables
    bool reuse_channels = true;
    std::uint64_t seed = 1;
    std::uint64_t cert_ttl = 1'000'000'000;  // seconds of logical time
    std::string ca_label = "archer-ca";
    std::string vip_prefix = "10.128.0.0/9";
  };

  explicit Network(Config cfg, Transport* transport = nullptr)
      : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    const auto prefix = VipPrefix::parse(cfg_.vip_prefix);
    if (!prefix) throw OverlayError(OverlayErrc::join_failed, "bad vip prefix " + cfg_.vip_prefix);
    prefix_ = *prefix;
    if (transport == nullptr) {
      owned_transport_ = std::make_unique<InMemoryTransport>();
      transport_ = owned_transport_.get();
    } else {
      transport_ = transport;
    }
    transport_->set_handler([this](const NodeId& at, std::span<const std::byte> bytes) { handle_frame(at, bytes); });

    std::array<std::byte, 32> ca_seed;
    fill_seed(ca_seed);
    ca_ = secnet::Identity<S>::from_seed(random_node_id(rng_, cfg_.ring_bits), ca_seed);
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  unsigned ring_bits() const { return cfg_.ring_bits; }
  std::size_t size() const { return sorted_ids_.size(); }
  const std::vector<NodeId>& live_ids() const { return sorted_ids_; }
  const typename S::PublicKey& ca_public_key() const { return ca_.public_key; }

  const NodeDescriptor& descriptor(const NodeId& id) const { return require(id).desc; }
  const RoutingTable& table_of(const NodeId& id) const { return require(id).table; }
  const secnet::Certificate<S>& certificate_of(const NodeId& id) const { return require(id).cert; }

  std::uint64_t now() const { return now_; }
  void set_now(std::uint64_t t) { now_ = t; }

  SecurityStats security_stats() const {
    SecurityStats s;
    s.channels_established = stats_.channels_established.load();
    s.frames_delivered = stats_.frames_delivered.load();
    s.frames_forwarded = stats_.frames_forwarded.load();
    s.rejected_malformed = stats_.rejected_malformed.load();
    s.rejected_cert = stats_.rejected_cert.load();
    s.rejected_auth = stats_.rejected_auth.load();
    s.rejected_replay = stats_.rejected_replay.load();
    s.rejected_routing = stats_.rejected_routing.load();
    s.inject_attempts = stats_.inject_attempts.load();
    s.inject_delivered = stats_.inject_delivered.load();
    return s;
  }

  // Adds a node. The first node needs no bootstrap; afterwards at least one
  // listed bootstrap must be live or the join is refused with state unchanged.
  NodeId join(const NodeSpec& spec, std::span<const NodeId> bootstraps = {}) {
    if (!sorted_ids_.empty()) {
      const bool any_live = std::any_of(bootstraps.begin(), bootstraps.end(),
                                        [this](const NodeId& b) { return nodes_.contains(b); });
      if (!any_live) throw OverlayError(OverlayErrc::join_failed, "no live bootstrap");
    }
    if (next_vip_offset_ + 1 >= prefix_.capacity()) {
      throw OverlayError(OverlayErrc::join_failed, "virtual address pool exhausted");
    }

    NodeId id = random_node_id(rng_, cfg_.ring_bits);
    while (nodes_.contains(id)) id = random_node_id(rng_, cfg_.ring_bits);

    std::array<std::byte, 32> seed;
    fill_seed(seed);

    auto st = std::make_unique<NodeState>();
    st->desc = NodeDescriptor{id, prefix_.at(next_vip_offset_++), spec.site, spec.pool, spec.speed, spec.nat};
    st->identity = secnet::Identity<S>::from_seed(id, seed);
    st->cert = secnet::issue_certificate<S>(ca_, st->identity.public_key, id, now_ + cfg_.cert_ttl, cfg_.ca_label);
    st->cert_bytes = st->cert.serialize();

    vips_.emplace(st->desc.vip.value(), id);
    sorted_ids_.insert(std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), id), id);
    nodes_.emplace(id, std::move(st));
    transport_->attach(id);

    rebuild_near_window(id);
    sample_shortcuts(id);
    migrate_shard_to(id);
    register_vip(vip_of(id), id);
    return id;
  }

  // Abrupt departure: no goodbye traffic, neighbors keep dangling entries
  // until the next stabilize pass. The node's registry shard is lost with it.
  void crash(const NodeId& id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw OverlayError(OverlayErrc::unknown_node, id.to_hex(cfg_.ring_bits));
    transport_->detach(id);
    vips_.erase(it->second->desc.vip.value());
    nodes_.erase(it);
    sorted_ids_.erase(std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), id));
  }

  // Repairs every near list to the true ring adjacency of the survivor set,
  // drops dangling shortcuts, and re-homes the vip registry. Idempotent.
  void stabilize() {
    for (const NodeId& id : sorted_ids_) rebuild_near(id);
    for (const NodeId& id : sorted_ids_) {
      auto& shortcuts = nodes_.at(id)->table.shortcuts;
      std::erase_if(shortcuts, [this](const NodeId& s) { return !nodes_.contains(s); });
    }
    for (const NodeId& id : sorted_ids_) nodes_.at(id)->shard.clear();
    for (const NodeId& id : sorted_ids_) register_vip(vip_of(id), id);
  }

  VirtualAddress vip_of(const NodeId& id) const { return require(id).desc.vip; }

  // DHT lookup as seen from one node: greedy walk to the terminus for
  // hash(vip), then check its shard and, on a distance tie, the shards of its
  // immediate neighbors.
  NodeId resolve_from(const NodeId& requester, VirtualAddress vip) const {
    if (!prefix_.contains(vip)) {
      throw OverlayError(OverlayErrc::no_route_to_host, vip.to_string() + " outside " + prefix_.to_string());
    }
    const auto key = vip.to_key();
    const NodeId point = hash_to_ring(key, cfg_.ring_bits);
    NodeId cur = requester;
    require(requester);
    for (std::size_t step = 0; step <= sorted_ids_.size() + 1; ++step) {
      RouteDecision decision;
      try {
        decision = route_next_hop(require(cur).table, cur, point, cfg_.ring_bits);
      } catch (const IsolatedNodeError&) {
        break;  // a lone node is its own lookup terminus
      }
      if (decision.deliver_to_self) break;
      cur = decision.next;
    }
    if (const auto hit = shard_lookup(cur, vip)) return *hit;
    for (const NodeId& n : require(cur).table.successors) {
      if (const auto hit = shard_lookup(n, vip)) return *hit;
    }
    for (const NodeId& n : require(cur).table.predecessors) {
      if (const auto hit = shard_lookup(n, vip)) return *hit;
    }
    throw OverlayError(OverlayErrc::no_route_to_host, vip.to_string() + " is not registered");
  }

  NodeId resolve(VirtualAddress vip) const {
    if (sorted_ids_.empty()) throw OverlayError(OverlayErrc::no_route_to_host, "overlay is empty");
    return resolve_from(sorted_ids_.front(), vip);
  }

  // Sends payload from src to the owner of dst. Direct NAT pairs take one
  // transport hop; otherwise the frame rides the ring greedily. The payload is
  // sealed end-to-end; relays see ciphertext only.
  DeliveryReceipt tunnel_send(const NodeId& src, VirtualAddress dst, std::span<const std::byte> payload) {
    NodeState& s = require_mut(src);
    if (!secnet::verify_certificate<S>(ca_.public_key, s.cert, now_)) {
      throw OverlayError(OverlayErrc::uncertified_endpoint, "source certificate rejected");
    }
    const NodeId dst_id = resolve_from(src, dst);
    if (dst_id == src) {
      DeliveryReceipt r;
      r.delivered = true;
      r.hops = 0;
      r.path = {src};
      r.payload.assign(payload.begin(), payload.end());
      return r;
    }
    NodeState& d = require_mut(dst_id);
    if (!secnet::verify_certificate<S>(ca_.public_key, d.cert, now_)) {
      throw OverlayError(OverlayErrc::uncertified_endpoint, "destination certificate rejected");
    }

    Frame f;
    f.nonce = ++nonce_counter_;
    f.origin = src;
    f.dest = dst_id;
    f.origin_cert = s.cert_bytes;
    f.path = {src};
    if (cfg_.reuse_channels) {
      f.sealed = secnet::seal(sender_channel(s, d), payload);
    } else {
      auto ch = secnet::establish_channel_endpoint<S>(s.identity, s.cert, d.cert, ca_.public_key, now_, true);
      stats_.channels_established.fetch_add(1);
      f.sealed = secnet::seal(ch, payload);
    }

    const LinkKind link = link_allowed(s.desc.nat, d.desc.nat);
    NodeId first_hop = dst_id;
    if (link == LinkKind::Relayed) {
      const auto decision = route_next_hop(s.table, src, dst_id, cfg_.ring_bits);
      if (decision.deliver_to_self) {
        DeliveryReceipt r;
        r.drop_reason = "routing dead end at source";
        r.link = link;
        return r;
      }
      first_hop = decision.next;
    }

    register_pending(f.nonce);
    transport_->send(first_hop, f.encode());
    transport_->flush();
    DeliveryReceipt r = wait_receipt(f.nonce);
    r.link = link;
    return r;
  }

  // Feeds raw bytes to a node as if they arrived from the wire, then reports
  // whether the frame (or anything it caused) was accepted as a delivery.
  InjectReport inject_frame(const NodeId& at, std::span<const std::byte> bytes) {
    stats_.inject_attempts.fetch_add(1);
    InjectReport report;
    std::uint64_t nonce = 0;
    if (const auto f = Frame::decode(bytes)) nonce = f->nonce;
    if (nonce != 0) register_pending(nonce);
    report.first_hop = handle_frame(at, bytes);
    transport_->flush();
    if (nonce != 0) {
      const DeliveryReceipt r = wait_receipt(nonce);
      report.delivered = r.delivered;
    } else {
      report.delivered = false;
    }
    if (report.delivered) stats_.inject_delivered.fetch_add(1);
    return report;
  }

  // Every ordered pair once; payload derived from the pair, checked on arrival.
  DeliveryStats all_pairs_delivery() {
    DeliveryStats out;
    for (const NodeId& a : sorted_ids_) {
      for (const NodeId& b : sorted_ids_) {
        if (a == b) continue;
        send_checked(a, b, out);
      }
    }
    return out;
  }

  DeliveryStats sample_pairs(std::size_t count, util::DetRng& rng) {
    DeliveryStats out;
    if (sorted_ids_.size() < 2) return out;
    for (std::size_t i = 0; i < count; ++i) {
      const NodeId a = sorted_ids_[rng.next_below(sorted_ids_.size())];
      NodeId b = a;
      while (b == a) b = sorted_ids_[rng.next_below(sorted_ids_.size())];
      send_checked(a, b, out);
    }
    return out;
  }

  // One JSON object per line, nodes in id order.
  void dump_topology(std::ostream& os) const {
    for (const NodeId& id : sorted_ids_) {
      const NodeState& st = *nodes_.at(id);
      nlohmann::ordered_json j;
      j["id"] = id.to_hex(cfg_.ring_bits);
      j["vip"] = st.desc.vip.to_string();
      j["site"] = st.desc.site;
      j["nat"] = std::string(to_string(st.desc.nat));
      auto hex_list = [this](const std::vector<NodeId>& ids, std::vector<std::string>& out, std::set<NodeId>& seen) {
        for (const NodeId& n : ids) {
          if (seen.insert(n).second) out.push_back(n.to_hex(cfg_.ring_bits));
        }
      };
      std::vector<std::string> near;
      std::set<NodeId> seen;
      hex_list(st.table.successors, near, seen);
      hex_list(st.table.predecessors, near, seen);
      j["near"] = near;
      std::vector<std::string> shortcuts;
      for (const NodeId& n : st.table.shortcuts) shortcuts.push_back(n.to_hex(cfg_.ring_bits));
      j["shortcuts"] = shortcuts;
      os << j.dump() << "\n";
    }
  }

 private:
  struct CachedPeer {
    std::uint64_t cert_fp = 0;
    std::size_t cert_len = 0;
    std::uint64_t expiry = 0;
  };

  // Ids are unique within one overlay, so the low limb is hash enough; a rare
  // collision at full width only shares a bucket.
  struct IdHash {
    std::size_t operator()(const NodeId& id) const { return std::hash<std::uint64_t>{}(id.low64()); }
  };

  struct NodeState {
    NodeDescriptor desc;
    secnet::Identity<S> identity;
    secnet::Certificate<S> cert;
    util::Bytes cert_bytes;
    RoutingTable table;
    std::map<NodeId, secnet::SecureChannel<S>> send_channels;
    std::map<NodeId, secnet::SecureChannel<S>> recv_channels;
    std::unordered_map<NodeId, CachedPeer, IdHash> verified;
    std::map<std::uint32_t, NodeId> shard;  // vip value -> owner id
    std::mutex mutex;                       // serializes handler entry in demo mode
  };

  struct AtomicStats {
    std::atomic<std::uint64_t> channels_established{0};
    std::atomic<std::uint64_t> frames_delivered{0};
    std::atomic<std::uint64_t> frames_forwarded{0};
    std::atomic<std::uint64_t> rejected_malformed{0};
    std::atomic<std::uint64_t> rejected_cert{0};
    std::atomic<std::uint64_t> rejected_auth{0};
    std::atomic<std::uint64_t> rejected_replay{0};
    std::atomic<std::uint64_t> rejected_routing{0};
    std::atomic<std::uint64_t> inject_attempts{0};
    std::atomic<std::uint64_t> inject_delivered{0};
  };

  struct Pending {
    bool done = false;
    DeliveryReceipt receipt;
  };

  void fill_seed(std::array<std::byte, 32>& seed) {
    for (int i = 0; i < 4; ++i) {
      const std::uint64_t v = rng_.next_u64();
      for (int j = 0; j < 8; ++j) seed[static_cast<std::size_t>(i * 8 + j)] = static_cast<std::byte>((v >> (8 * j)) & 0xff);
    }
  }

  const NodeState& require(const NodeId& id) const {
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) throw OverlayError(OverlayErrc::unknown_node, id.to_hex(cfg_.ring_bits));
    return *it->second;
  }

  NodeState& require_mut(const NodeId& id) {
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) throw OverlayError(OverlayErrc::unknown_node, id.to_hex(cfg_.ring_bits));
    return *it->second;
  }

  std::size_t position_of(const NodeId& id) const {
    return static_cast<std::size_t>(std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), id) - sorted_ids_.begin());
  }

  // True ring adjacency: up to near_count distinct nodes each way, then the
  // spec's ordering (ascending ring distance, id as tie-break).
  void rebuild_near(const NodeId& id) {
    NodeState& st = *nodes_.at(id);
    st.table.successors.clear();
    st.table.predecessors.clear();
    const std::size_t n = sorted_ids_.size();
    if (n <= 1) return;
    const std::size_t pos = position_of(id);
    const std::size_t k = std::min<std::size_t>(cfg_.near_count, n - 1);
    for (std::size_t i = 1; i <= k; ++i) {
      st.table.successors.push_back(sorted_ids_[(pos + i) % n]);
      st.table.predecessors.push_back(sorted_ids_[(pos + n - i) % n]);
    }
    auto by_distance = [&](const NodeId& a, const NodeId& b) {
      const NodeId da = ring_distance(a, id, cfg_.ring_bits);
      const NodeId db = ring_distance(b, id, cfg_.ring_bits);
      return da != db ? da < db : a < b;
    };
    std::sort(st.table.successors.begin(), st.table.successors.end(), by_distance);
    std::sort(st.table.predecessors.begin(), st.table.predecessors.end(), by_distance);
  }

  void rebuild_near_window(const NodeId& id) {
    const std::size_t n = sorted_ids_.size();
    const std::size_t pos = position_of(id);
    const std::size_t k = cfg_.near_count;
    if (n <= 2 * k + 1) {
      for (const NodeId& other : sorted_ids_) rebuild_near(other);
      return;
    }
    for (std::size_t d = 0; d <= k; ++d) {
      rebuild_near(sorted_ids_[(pos + d) % n]);
      if (d > 0) rebuild_near(sorted_ids_[(pos + n - d) % n]);
    }
  }

  void sample_shortcuts(const NodeId& id) {
    const std::size_t n = sorted_ids_.size();
    std::size_t target;
    if (cfg_.shortcut_count < 0) {
      target = n <= 2 ? 0 : static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n))));
    } else {
      target = static_cast<std::size_t>(cfg_.shortcut_count);
    }
    if (target == 0 || n < 4) return;
    NodeState& st = *nodes_.at(id);
    const double log2n = std::log2(static_cast<double>(n));
    const double lo_exp = static_cast<double>(cfg_.ring_bits) - log2n;
    const double hi_exp = static_cast<double>(cfg_.ring_bits) - 1.0;
    const std::size_t max_attempts = 8 * target;
    for (std::size_t attempt = 0; attempt < max_attempts && st.table.shortcuts.size() < target; ++attempt) {
      const double e = lo_exp + (hi_exp - lo_exp) * rng_.next_double();
      const NodeId offset = pow2_fractional(e, cfg_.ring_bits);
      const NodeId point = ring_add(id, offset, cfg_.ring_bits);
      const NodeId cand = closest_live(point);
      if (cand == id) continue;
      auto contains = [&](const std::vector<NodeId>& v) { return std::find(v.begin(), v.end(), cand) != v.end(); };
      if (contains(st.table.successors) || contains(st.table.predecessors) || contains(st.table.shortcuts)) continue;
      st.table.shortcuts.push_back(cand);
    }
  }

  // Closest live node to a ring point; ties broken by smaller id. The winner
  // is always one of the two ring-adjacent nodes around the point.
  NodeId closest_live(const NodeId& point) const {
    const std::size_t n = sorted_ids_.size();
    auto it = std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), point);
    const std::size_t next_pos = static_cast<std::size_t>(it - sorted_ids_.begin()) % n;
    const std::size_t prev_pos = (next_pos + n - 1) % n;
    const NodeId a = sorted_ids_[prev_pos];
    const NodeId b = sorted_ids_[next_pos];
    const NodeId da = ring_distance(a, point, cfg_.ring_bits);
    const NodeId db = ring_distance(b, point, cfg_.ring_bits);
    if (da != db) return da < db ? a : b;
    return a < b ? a : b;
  }

  void register_vip(VirtualAddress vip, const NodeId& owner) {
    const NodeId point = hash_to_ring(vip.to_key(), cfg_.ring_bits);
    nodes_.at(closest_live(point))->shard[vip.value()] = owner;
  }

  // Pulls entries whose placement moved to the newcomer out of the shards of
  // its two ring neighbors. Placement only ever moves from an adjacent node.
  void migrate_shard_to(const NodeId& id) {
    const std::size_t n = sorted_ids_.size();
    if (n <= 1) return;
    const std::size_t pos = position_of(id);
    NodeState& me = *nodes_.at(id);
    for (const std::size_t neighbor_pos : {(pos + 1) % n, (pos + n - 1) % n}) {
      const NodeId neighbor = sorted_ids_[neighbor_pos];
      if (neighbor == id) continue;
      auto& shard = nodes_.at(neighbor)->shard;
      for (auto it = shard.begin(); it != shard.end();) {
        const NodeId point = hash_to_ring(VirtualAddress(it->first).to_key(), cfg_.ring_bits);
        if (closest_live(point) == id) {
          me.shard[it->first] = it->second;
          it = shard.erase(it);
        } else {
          ++it;
        }
      }
    }
  }

  std::optional<NodeId> shard_lookup(const NodeId& holder, VirtualAddress vip) const {
    const auto it = nodes_.find(holder);
    if (it == nodes_.end()) return std::nullopt;
    const auto& shard = it->second->shard;
    const auto hit = shard.find(vip.value());
    if (hit == shard.end()) return std::nullopt;
    if (!nodes_.contains(hit->second)) return std::nullopt;
    return hit->second;
  }

  secnet::SecureChannel<S>& sender_channel(NodeState& src, NodeState& dst) {
    auto it = src.send_channels.find(dst.desc.id);
    if (it == src.send_channels.end()) {
      auto ch = secnet::establish_channel_endpoint<S>(src.identity, src.cert, dst.cert, ca_.public_key, now_, true);
      stats_.channels_established.fetch_add(1);
      it = src.send_channels.emplace(dst.desc.id, std::move(ch)).first;
    }
    return it->second;
  }

  void register_pending(std::uint64_t nonce) {
    std::lock_guard<std::mutex> lock(pending_mutex_);
    pending_[nonce] = Pending{};
  }

  void finish_pending(std::uint64_t nonce, DeliveryReceipt receipt) {
    std::lock_guard<std::mutex> lock(pending_mutex_);
    const auto it = pending_.find(nonce);
    if (it == pending_.end()) return;
    it->second.done = true;
    it->second.receipt = std::move(receipt);
    pending_cv_.notify_all();
  }

  DeliveryReceipt wait_receipt(std::uint64_t nonce) {
    std::unique_lock<std::mutex> lock(pending_mutex_);
    if (!transport_->synchronous()) {
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
      pending_cv_.wait_until(lock, deadline, [&] {
        const auto it = pending_.find(nonce);
        return it == pending_.end() || it->second.done;
      });
    }
    const auto it = pending_.find(nonce);
    DeliveryReceipt r;
    if (it != pending_.end()) {
      if (it->second.done) {
        r = std::move(it->second.receipt);
      } else {
        r.drop_reason = "frame lost in transit";
      }
      pending_.erase(it);
    }
    return r;
  }

  void reject(std::uint64_t nonce, std::atomic<std::uint64_t>& counter, const char* reason) {
    counter.fetch_add(1);
    DeliveryReceipt r;
    r.drop_reason = reason;
    finish_pending(nonce, std::move(r));
  }

  // Single entry point for every frame arriving at a node, whether from a
  // legitimate send, a relay, or an attacker via inject_frame.
  FrameOutcome handle_frame(const NodeId& at, std::span<const std::byte> bytes) {
    const auto node_it = nodes_.find(at);
    if (node_it == nodes_.end()) return FrameOutcome::DroppedUnknownNode;
    NodeState& st = *node_it->second;
    std::lock_guard<std::mutex> node_lock(st.mutex);

    auto frame = Frame::decode(bytes);
    if (!frame) {
      stats_.rejected_malformed.fetch_add(1);
      return FrameOutcome::RejectedMalformed;
    }
    if (!verify_origin(st, *frame)) {
      reject(frame->nonce, stats_.rejected_cert, "origin certificate rejected");
      return FrameOutcome::RejectedCert;
    }

    if (frame->dest != at) {
      if (frame->path.size() >= Frame::kMaxPath) {
        reject(frame->nonce, stats_.rejected_routing, "path length limit");
        return FrameOutcome::RejectedRouting;
      }
      RouteDecision decision;
      try {
        decision = route_next_hop(st.table, at, frame->dest, cfg_.ring_bits);
      } catch (const IsolatedNodeError&) {
        reject(frame->nonce, stats_.rejected_routing, "isolated relay");
        return FrameOutcome::RejectedRouting;
      }
      if (decision.deliver_to_self) {
        reject(frame->nonce, stats_.rejected_routing, "routing dead end");
        return FrameOutcome::RejectedRouting;
      }
      frame->path.push_back(at);
      stats_.frames_forwarded.fetch_add(1);
      transport_->send(decision.next, frame->encode());
      return FrameOutcome::Forwarded;
    }

    // Destination: derive or look up the receiving end of the channel, then
    // open the sealed record. Counter state persists only in reuse mode.
    util::Bytes plain;
    try {
      const auto origin_cert = secnet::Certificate<S>::parse(frame->origin_cert);
      if (!origin_cert) throw secnet::SecnetError(secnet::SecnetErrc::malformed_frame, "certificate bytes");
      if (cfg_.reuse_channels) {
        auto it = st.recv_channels.find(frame->origin);
        if (it == st.recv_channels.end()) {
          auto ch = secnet::establish_channel_endpoint<S>(st.identity, st.cert, *origin_cert, ca_.public_key, now_, false);
          it = st.recv_channels.emplace(frame->origin, std::move(ch)).first;
        }
        plain = secnet::open(it->second, frame->sealed);
      } else {
        auto ch = secnet::establish_channel_endpoint<S>(st.identity, st.cert, *origin_cert, ca_.public_key, now_, false);
        plain = secnet::open(ch, frame->sealed);
      }
    } catch (const secnet::SecnetError& e) {
      switch (e.code()) {
        case secnet::SecnetErrc::replay_detected:
          reject(frame->nonce, stats_.rejected_replay, "replayed or out-of-order record");
          return FrameOutcome::RejectedReplay;
        case secnet::SecnetErrc::certificate_invalid:
        case secnet::SecnetErrc::identity_mismatch:
          reject(frame->nonce, stats_.rejected_cert, "channel certificate rejected");
          return FrameOutcome::RejectedCert;
        default:
          reject(frame->nonce, stats_.rejected_auth, "record failed authentication");
          return FrameOutcome::RejectedAuth;
      }
    }

    frame->path.push_back(at);
    stats_.frames_delivered.fetch_add(1);
    DeliveryReceipt r;
    r.delivered = true;
    r.hops = frame->path.size() - 1;
    r.path = std::move(frame->path);
    r.payload = std::move(plain);
    finish_pending(frame->nonce, std::move(r));
    return FrameOutcome::Delivered;
  }

  // Verifies the frame's embedded origin certificate against the CA and the
  // claimed origin id, with a fingerprint cache so relays pay once per origin.
  bool verify_origin(NodeState& st, const Frame& frame) {
    const std::uint64_t fp = util::fnv1a64(frame.origin_cert);
    const auto cached = st.verified.find(frame.origin);
    if (cached != st.verified.end() && cached->second.cert_fp == fp &&
        cached->second.cert_len == frame.origin_cert.size() && now_ < cached->second.expiry) {
      return true;
    }
    const auto cert = secnet::Certificate<S>::parse(frame.origin_cert);
    if (!cert) return false;
    if (cert->subject != frame.origin) return false;
    if (!secnet::verify_certificate<S>(ca_.public_key, *cert, now_)) return false;
    st.verified[frame.origin] = CachedPeer{fp, frame.origin_cert.size(), cert->expiry};
    return true;
  }

  void send_checked(const NodeId& a, const NodeId& b, DeliveryStats& out) {
    util::Bytes payload;
    util::put_u64_be(payload, a.low64());
    util::put_u64_be(payload, b.low64());
    ++out.attempted;
    const DeliveryReceipt r = tunnel_send(a, vip_of(b), payload);
    if (r.delivered && r.payload == payload) {
      ++out.delivered;
      out.total_hops += r.hops;
      out.max_hops = std::max(out.max_hops, r.hops);
    }
  }

  Config cfg_;
  util::DetRng rng_;
  VipPrefix prefix_;
  std::uint64_t next_vip_offset_ = 1;
  std::uint64_t now_ = 0;
  std::uint64_t nonce_counter_ = 0;

  secnet::Identity<S> ca_;
  std::unordered_map<NodeId, std::unique_ptr<NodeState>, IdHash> nodes_;
  std::vector<NodeId> sorted_ids_;
  std::map<std::uint32_t, NodeId> vips_;

  std::unique_ptr<InMemoryTransport> owned_transport_;
  Transport* transport_ = nullptr;

  AtomicStats stats_;
  std::mutex pending_mutex_;
  std::condition_variable pending_cv_;
  std::map<std::uint64_t, Pending> pending_;
};

}  // namespace archer::overlay
