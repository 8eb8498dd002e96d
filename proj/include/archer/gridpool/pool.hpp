#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "archer/classad/ad.hpp"
#include "archer/overlay/node_id.hpp"
#include "archer/sim/job.hpp"

namespace archer::gridpool {

using overlay::NodeId;
using sim::Assignment;
using sim::AssignmentOrigin;
using sim::Job;
using sim::JobState;

struct Workstation {
  NodeId id;
  std::string site;
  std::string pool_id;
  double speed = 1.0;  // work units per second before overhead
  classad::Ad ad{classad::AdKind::Resource};
  bool available = true;  // joined and not drained away
};

struct Pool {
  std::string pool_id;
  std::vector<NodeId> members;                // sorted ascending
  std::vector<std::uint64_t> queue;           // job ids, arrival order
  std::vector<std::string> flock_targets;     // tried in this order
  double negotiation_interval = 60.0;
};

struct ActiveRun {
  std::uint64_t job_id = 0;
  double start_time = 0.0;
  AssignmentOrigin origin = AssignmentOrigin::Local;
};

struct PreemptionEvent {
  std::uint64_t victim_job_id = 0;
  NodeId node_id;
  double time = 0.0;
  double victim_start = 0.0;  // lets the driver account the lost work
  const char* reason = "local-priority";
};

// All scheduling state: nodes, pools, jobs, and the run map. Mutated only by
// the simulation driver; a single logical writer.
class GridState {
 public:
  std::map<std::string, Pool> pools;             // iteration = config order via pool_order
  std::vector<std::string> pool_order;
  std::map<NodeId, Workstation> nodes;
  std::map<std::uint64_t, Job> jobs;
  std::map<NodeId, ActiveRun> running;

  Pool& pool(const std::string& id) {
    auto it = pools.find(id);
    if (it == pools.end()) throw std::out_of_range("unknown pool: " + id);
    return it->second;
  }
  const Pool& pool(const std::string& id) const {
    auto it = pools.find(id);
    if (it == pools.end()) throw std::out_of_range("unknown pool: " + id);
    return it->second;
  }

  Job& job(std::uint64_t id) {
    auto it = jobs.find(id);
    if (it == jobs.end()) throw std::out_of_range("unknown job");
    return it->second;
  }

  bool idle(const NodeId& node) const {
    auto it = nodes.find(node);
    return it != nodes.end() && it->second.available && running.find(node) == running.end();
  }

  void add_pool(const std::string& id, double interval = 60.0) {
    if (pools.count(id)) throw std::invalid_argument("duplicate pool: " + id);
    pools.emplace(id, Pool{id, {}, {}, {}, interval});
    pool_order.push_back(id);
  }

  void add_node(Workstation ws) {
    Pool& p = pool(ws.pool_id);
    auto pos = std::lower_bound(p.members.begin(), p.members.end(), ws.id);
    if (pos != p.members.end() && *pos == ws.id) throw std::invalid_argument("duplicate node");
    p.members.insert(pos, ws.id);
    nodes.emplace(ws.id, std::move(ws));
  }

  void submit(Job job) {
    Pool& p = pool(job.origin_pool);
    std::uint64_t id = job.job_id;
    if (jobs.count(id)) throw std::invalid_argument("duplicate job id");
    jobs.emplace(id, std::move(job));
    p.queue.push_back(id);
  }

  // Counts for the conservation invariant.
  struct Census {
    std::size_t queued = 0;
    std::size_t running_count = 0;
    std::size_t completed = 0;
  };
  Census census() const {
    Census c;
    for (const auto& [id, j] : jobs) {
      switch (j.state) {
        case JobState::Queued: ++c.queued; break;
        case JobState::Running: ++c.running_count; break;
        case JobState::Completed: ++c.completed; break;
      }
    }
    return c;
  }
};

}  // namespace archer::gridpool
