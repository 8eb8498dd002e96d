#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "archer/classad/ad.hpp"
#include "archer/overlay/node_id.hpp"

namespace archer::sim {

enum class JobState { Queued, Running, Completed };

enum class AssignmentOrigin { Local, Flocked };

inline const char* to_string(AssignmentOrigin o) {
  return o == AssignmentOrigin::Local ? "local" : "flocked";
}

struct Assignment {
  std::uint64_t job_id = 0;
  overlay::NodeId node_id;
  double start_time = 0.0;
  AssignmentOrigin origin = AssignmentOrigin::Local;
};

struct Job {
  std::uint64_t job_id = 0;
  std::string owner;
  std::string origin_pool;
  double work = 0.0;  // normalized work units
  double submit_time = 0.0;
  JobState state = JobState::Queued;
  double completion_time = 0.0;
  double last_start_time = 0.0;
  std::uint32_t preemption_count = 0;
  double wasted_work = 0.0;  // work lost to kill-and-restart preemptions
  classad::Ad ad{classad::AdKind::Job};
  std::vector<Assignment> history;
};

}  // namespace archer::sim
