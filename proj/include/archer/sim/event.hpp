#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "archer/overlay/node_id.hpp"

namespace archer::sim {

enum class EventKind {
  Submit,
  NegotiateTick,
  JobStart,
  JobComplete,
  Preempt,
  NodeJoin,
  NodeLeave,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Submit: return "submit";
    case EventKind::NegotiateTick: return "negotiate";
    case EventKind::JobStart: return "start";
    case EventKind::JobComplete: return "complete";
    case EventKind::Preempt: return "preempt";
    case EventKind::NodeJoin: return "node-join";
    case EventKind::NodeLeave: return "node-leave";
  }
  return "?";
}

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::Submit;
  std::uint64_t seq = 0;  // insertion sequence; the tie-breaker
  std::uint64_t job_id = 0;
  std::uint64_t generation = 0;  // assignment generation for JobComplete
  overlay::NodeId node;
  std::string pool;
};

// Min-heap over (time, insertion sequence): simultaneous events fire in the
// order they were scheduled, which keeps runs reproducible.
class EventQueue {
 public:
  void push(SimEvent ev) {
    ev.seq = next_seq_++;
    heap_.push(std::move(ev));
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const SimEvent& top() const { return heap_.top(); }

  SimEvent pop() {
    SimEvent ev = heap_.top();
    heap_.pop();
    return ev;
  }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

// One line of the run trace; every state transition appends one record.
struct TraceRecord {
  double t = 0.0;
  EventKind kind = EventKind::Submit;
  std::optional<std::uint64_t> job;
  std::optional<overlay::NodeId> node;
  std::string pool;
};

}  // namespace archer::sim
