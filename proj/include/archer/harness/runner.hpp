#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "archer/harness/config.hpp"
#include "archer/harness/report.hpp"
#include "archer/overlay/network.hpp"
#include "archer/secnet/mock_suite.hpp"
#include "archer/sim/engine.hpp"
#include "archer/sim/metrics.hpp"
#include "archer/util/rng.hpp"

namespace archer::harness {

namespace detail {

inline overlay::NatClass draw_nat(const OverlayProbeSpec& spec, util::DetRng& rng) {
  const double r = rng.next_double();
  if (r < spec.frac_public) return overlay::NatClass::Public;
  if (r < spec.frac_public + spec.frac_cone) return overlay::NatClass::Cone;
  return overlay::NatClass::Symmetric;
}

// Routing health plus a hostile-traffic sample on a mock-crypto overlay the
// size the config asks for. Seeded from the config alone so the numbers are
// identical for every simulation seed.
inline void probe_overlay(const OverlayProbeSpec& spec, OverlayStats& net_out,
                          SecurityProbeStats& sec_out) {
  using Suite = secnet::MockSuite;
  using Net = overlay::Network<Suite>;
  typename Net::Config cfg;
  cfg.ring_bits = spec.bits;
  cfg.seed = spec.seed;
  Net net(cfg);

  util::DetRng rng = util::DetRng(spec.seed).fork(0x70726f6265);
  std::vector<overlay::NodeId> ids;
  ids.reserve(spec.nodes);
  for (std::size_t i = 0; i < spec.nodes; ++i) {
    overlay::NodeSpec node;
    node.site = "probe";
    node.pool = "archer";
    node.nat = draw_nat(spec, rng);
    if (ids.empty()) {
      ids.push_back(net.join(node));
    } else {
      ids.push_back(net.join(node, std::span<const overlay::NodeId>(&ids[0], 1)));
    }
  }
  net.stabilize();

  const overlay::DeliveryStats d = net.all_pairs_delivery();
  net_out.nodes = spec.nodes;
  net_out.bits = spec.bits;
  net_out.pairs = d.attempted;
  net_out.delivery_rate = d.delivery_rate();
  net_out.mean_hops = d.mean_hops();
  net_out.max_hops = d.max_hops;

  const overlay::SecurityStats before = net.security_stats();

  for (int i = 0; i < 32; ++i) {
    const overlay::NodeId src = ids[rng.next_below(ids.size())];
    overlay::NodeId dst = src;
    while (dst == src) dst = ids[rng.next_below(ids.size())];
    sec_out.legitimate_sends += 1;
    if (net.tunnel_send(src, net.vip_of(dst), util::to_bytes("probe")).delivered)
      sec_out.legitimate_delivered += 1;
  }

  // Garbage bytes straight onto the wire.
  for (int i = 0; i < 128; ++i) {
    util::Bytes junk(rng.next_below(240));
    for (std::byte& b : junk) b = static_cast<std::byte>(rng.next_below(256));
    net.inject_frame(ids[rng.next_below(ids.size())], junk);
  }

  // Well-formed frames whose certificate chain does not lead to the CA.
  std::array<std::byte, 32> seed_bytes{};
  for (std::size_t i = 0; i < seed_bytes.size(); ++i)
    seed_bytes[i] = static_cast<std::byte>(rng.next_below(256));
  const auto mallory = secnet::Identity<Suite>::from_seed(
      overlay::random_node_id(rng, spec.bits), seed_bytes);
  const auto self_signed =
      secnet::issue_certificate<Suite>(mallory, mallory.public_key, mallory.node_id, 1'000'000);
  for (int i = 0; i < 64; ++i) {
    const overlay::NodeId target = ids[rng.next_below(ids.size())];
    overlay::Frame f;
    f.nonce = 0xf000 + static_cast<std::uint64_t>(i);
    f.origin = mallory.node_id;
    f.dest = target;
    f.origin_cert = self_signed.serialize();
    f.path = {mallory.node_id};
    secnet::SecureChannel<Suite> ch;
    ch.peer_a = mallory.node_id;
    ch.peer_b = target;
    ch.session_key = Suite::derive_session(mallory.secret_key, net.certificate_of(target).subject_key,
                                           mallory.node_id, target);
    f.sealed = secnet::seal(ch, util::to_bytes("hostile"));
    net.inject_frame(target, f.encode());
  }

  const overlay::SecurityStats after = net.security_stats();
  sec_out.hostile_frames = after.inject_attempts - before.inject_attempts;
  const auto rejected = [](const overlay::SecurityStats& s) {
    return s.rejected_malformed + s.rejected_cert + s.rejected_auth + s.rejected_replay +
           s.rejected_routing;
  };
  sec_out.hostile_rejected = rejected(after) - rejected(before);
}

}  // namespace detail

// End-to-end run: simulate the workload, slice metrics per owner, and attach
// the config-seeded overlay and security probes.
inline Report run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto wall_start = std::chrono::steady_clock::now();

  sim::Simulation simulation(cfg.profile, seed);
  simulation.run();

  Report report;
  report.name = cfg.name;
  report.seed = seed;
  report.overall = sim::collect_metrics(simulation.state());
  report.trace_jsonl = simulation.trace_jsonl();
  report.cdf_csv = report.overall.cdf_csv();
  report.config_echo = cfg.echo;

  std::set<std::string> seen;
  std::vector<std::string> owners;
  for (const sim::JobGroupSpec& g : cfg.profile.job_groups)
    if (seen.insert(g.owner).second) owners.push_back(g.owner);

  auto serial_seconds = [&](const std::string* owner) {
    double total = 0.0;
    for (const auto& [id, job] : simulation.state().jobs) {
      if (owner && job.owner != *owner) continue;
      total += sim::job_runtime(job.work, 1.0, sim::OverheadModel{});
    }
    return total;
  };

  report.serial_baseline_seconds = serial_seconds(nullptr);
  if (report.overall.makespan > 0.0)
    report.speedup_vs_serial = report.serial_baseline_seconds / report.overall.makespan;
  for (const std::string& owner : owners) {
    OwnerSection section;
    section.owner = owner;
    section.metrics = sim::collect_metrics(simulation.state(), owner);
    section.serial_baseline_seconds = serial_seconds(&owner);
    if (section.metrics.makespan > 0.0)
      section.speedup_vs_serial = section.serial_baseline_seconds / section.metrics.makespan;
    report.owners.push_back(std::move(section));
  }

  detail::probe_overlay(cfg.overlay, report.overlay, report.security);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

}  // namespace archer::harness
