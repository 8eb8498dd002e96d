#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace archer::sim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OverheadFlavor { None, Xen, Vmware };

inline const char* to_string(OverheadFlavor f) {
  switch (f) {
    case OverheadFlavor::Xen: return "xen";
    case OverheadFlavor::Vmware: return "vmware";
    default: return "none";
  }
}

inline OverheadFlavor overhead_from_string(const std::string& s) {
  if (s == "none") return OverheadFlavor::None;
  if (s == "xen") return OverheadFlavor::Xen;
  if (s == "vmware") return OverheadFlavor::Vmware;
  throw ConfigError("unknown overhead flavor: " + s);
}

// Virtualization slows execution by a constant factor.
struct OverheadModel {
  OverheadFlavor flavor = OverheadFlavor::None;
  double multiplier = 1.0;

  static OverheadModel from(OverheadFlavor flavor) {
    switch (flavor) {
      case OverheadFlavor::Xen: return {flavor, 1.01};
      case OverheadFlavor::Vmware: return {flavor, 1.11};
      default: return {flavor, 1.0};
    }
  }

  static OverheadModel custom(double multiplier) {
    if (multiplier < 1.0) throw ConfigError("overhead multiplier must be >= 1.0");
    return {OverheadFlavor::None, multiplier};
  }
};

inline double job_runtime(double work, double speed, const OverheadModel& overhead) {
  if (speed <= 0.0) throw ConfigError("node speed must be positive");
  return (work / speed) * overhead.multiplier;
}

struct SiteSpec {
  std::string name;
  std::string pool_id;
  std::size_t node_count = 0;
  double speed = 1.0;
  std::int64_t memory = 2048;
  std::string arch = "x86";
};

struct PoolSpec {
  std::string pool_id;
  std::vector<std::string> flock_targets;
  double negotiation_interval = 60.0;
};

struct JobGroupSpec {
  std::string owner;
  std::string pool_id;
  std::size_t count = 0;
  double work = 0.0;
  double submit_start = 0.0;
  double submit_gap = -1.0;  // < 0: inherit the profile's submit_link_delay
  double work_jitter = 0.0;  // relative half-width of the uniform jitter
  std::string requirements = "true";
  std::string rank;  // empty: no rank attribute
  std::map<std::string, std::string> attributes;  // extra ad entries, parsed as expressions
};

struct NodeChurnSpec {
  double time = 0.0;
  std::string site;
  std::size_t index = 0;  // within the site
  bool join = true;       // false: leave (drains; never evicts)
};

struct ExperimentProfile {
  std::string name;
  std::size_t n_jobs = 0;   // declared; must equal the sum over job groups
  std::size_t n_nodes = 0;  // declared; must equal the sum over sites
  std::vector<SiteSpec> sites;
  std::vector<PoolSpec> pools;
  std::vector<JobGroupSpec> job_groups;
  std::vector<NodeChurnSpec> churn;
  OverheadModel overhead;
  double submit_link_delay = 5.0;

  std::size_t site_node_total() const {
    std::size_t n = 0;
    for (const auto& s : sites) n += s.node_count;
    return n;
  }
  std::size_t group_job_total() const {
    std::size_t n = 0;
    for (const auto& g : job_groups) n += g.count;
    return n;
  }
};

}  // namespace archer::sim
