#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/harness/config.hpp"
#include "archer/sim/metrics.hpp"

namespace archer::harness {

struct OverlayStats {
  std::size_t nodes = 0;
  unsigned bits = 0;
  std::uint64_t pairs = 0;
  double delivery_rate = 1.0;
  double mean_hops = 0.0;
  std::size_t max_hops = 0;
};

struct SecurityProbeStats {
  std::uint64_t legitimate_sends = 0;
  std::uint64_t legitimate_delivered = 0;
  std::uint64_t hostile_frames = 0;
  std::uint64_t hostile_rejected = 0;
};

// Per-owner slice: the owner's metrics plus how long the same jobs would
// take back-to-back on one reference node (speed 1, no overhead).
struct OwnerSection {
  std::string owner;
  sim::Metrics metrics;
  double serial_baseline_seconds = 0.0;
  double speedup_vs_serial = 0.0;
};

struct Report {
  std::string name;
  std::uint64_t seed = 0;
  sim::Metrics overall;
  std::vector<OwnerSection> owners;
  double serial_baseline_seconds = 0.0;
  double speedup_vs_serial = 0.0;
  double wall_seconds = 0.0;
  OverlayStats overlay;
  SecurityProbeStats security;
  nlohmann::ordered_json config_echo;
  std::string trace_jsonl;
  std::string cdf_csv;

  nlohmann::ordered_json summary_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = name;
    j["seed"] = seed;
    j["metrics"] = overall.to_json();
    j["serial_baseline_seconds"] = serial_baseline_seconds;
    j["speedup_vs_serial"] = speedup_vs_serial;
    nlohmann::ordered_json owners_json;
    for (const OwnerSection& o : owners) {
      nlohmann::ordered_json oj = o.metrics.to_json();
      oj["serial_baseline_seconds"] = o.serial_baseline_seconds;
      oj["speedup_vs_serial"] = o.speedup_vs_serial;
      owners_json[o.owner] = std::move(oj);
    }
    j["owners"] = std::move(owners_json);
    j["overlay"] = {
        {"nodes", overlay.nodes},
        {"bits", overlay.bits},
        {"pairs", overlay.pairs},
        {"delivery_rate", overlay.delivery_rate},
        {"mean_hops", overlay.mean_hops},
        {"max_hops", overlay.max_hops},
    };
    j["security"] = {
        {"legitimate_sends", security.legitimate_sends},
        {"legitimate_delivered", security.legitimate_delivered},
        {"hostile_frames", security.hostile_frames},
        {"hostile_rejected", security.hostile_rejected},
    };
    j["wall_seconds"] = wall_seconds;
    j["config"] = config_echo;
    return j;
  }
};

// Writes summary, trace, and CDF under `dir` using the configured names.
inline void write_report(const Report& report, const std::filesystem::path& dir,
                         const OutputSpec& spec) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& leaf, const std::string& body) {
    std::ofstream out(dir / leaf, std::ios::binary);
    if (!out) throw sim::ConfigError("cannot write " + (dir / leaf).string());
    out << body;
  };
  write(spec.summary, report.summary_json().dump(2) + "\n");
  write(spec.trace, report.trace_jsonl);
  write(spec.cdf, report.cdf_csv);
}

}  // namespace archer::harness
