#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "archer/classad/match.hpp"
#include "archer/gridpool/pool.hpp"

namespace archer::gridpool {

struct NegotiationResult {
  std::vector<Assignment> assignments;
  std::vector<PreemptionEvent> preemptions;
};

namespace detail {

// Consideration order: local jobs first, then submit time, then job id.
inline std::vector<std::uint64_t> consideration_order(const GridState& state, const Pool& pool) {
  std::vector<std::uint64_t> order = pool.queue;
  std::stable_sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
    const Job& ja = state.jobs.at(a);
    const Job& jb = state.jobs.at(b);
    int ca = ja.origin_pool == pool.pool_id ? 0 : 1;
    int cb = jb.origin_pool == pool.pool_id ? 0 : 1;
    if (ca != cb) return ca < cb;
    if (ja.submit_time != jb.submit_time) return ja.submit_time < jb.submit_time;
    return a < b;
  });
  return order;
}

inline std::optional<NodeId> pick_idle(const GridState& state, const Pool& pool, const Job& job) {
  std::vector<classad::Candidate> candidates;
  for (const NodeId& id : pool.members) {
    if (!state.idle(id)) continue;
    candidates.push_back({id, &state.nodes.at(id).ad});
  }
  auto best = classad::select_best(job.ad, candidates);
  if (!best) return std::nullopt;
  return candidates[*best].id;
}

inline void erase_from_queue(Pool& pool, std::uint64_t job_id) {
  auto it = std::find(pool.queue.begin(), pool.queue.end(), job_id);
  if (it == pool.queue.end()) throw std::logic_error("job not queued at pool");
  pool.queue.erase(it);
}

inline Assignment assign(GridState& state, const std::string& queue_pool, std::uint64_t job_id,
                         const NodeId& node, double now) {
  Job& job = state.job(job_id);
  const Workstation& ws = state.nodes.at(node);
  AssignmentOrigin origin = ws.pool_id == job.origin_pool ? AssignmentOrigin::Local
                                                          : AssignmentOrigin::Flocked;
  erase_from_queue(state.pool(queue_pool), job_id);
  state.running[node] = ActiveRun{job_id, now, origin};
  job.state = JobState::Running;
  job.last_start_time = now;
  Assignment a{job_id, node, now, origin};
  job.history.push_back(a);
  return a;
}

}  // namespace detail

// Sends a preempted flocked job back to its origin pool's queue. Work is
// lost entirely: kill-and-restart, no checkpoint. Preempting a job that was
// running with Local origin is a policy violation, not an input error.
inline std::uint64_t requeue_preempted(GridState& state, const NodeId& node, double now) {
  auto it = state.running.find(node);
  if (it == state.running.end()) throw std::logic_error("no active run on node");
  if (it->second.origin != AssignmentOrigin::Flocked)
    throw std::logic_error("attempted to preempt a local job");
  std::uint64_t victim_id = it->second.job_id;
  state.running.erase(it);
  Job& victim = state.job(victim_id);
  victim.state = JobState::Queued;
  victim.preemption_count += 1;
  (void)now;
  state.pool(victim.origin_pool).queue.push_back(victim_id);
  return victim_id;
}

// Candidate resources for one queued job: idle matching local members first,
// then idle matching members of each flock target in configured order.
inline std::vector<NodeId> flock_candidates(const GridState& state, const std::string& pool_id,
                                            const Job& job) {
  std::vector<NodeId> out;
  auto append_pool = [&](const Pool& p) {
    for (const NodeId& id : p.members) {
      if (!state.idle(id)) continue;
      if (!classad::symmetric_match(job.ad, state.nodes.at(id).ad)) continue;
      out.push_back(id);
    }
  };
  const Pool& pool = state.pool(pool_id);
  append_pool(pool);
  for (const std::string& target : pool.flock_targets) append_pool(state.pool(target));
  return out;
}

// Local phase: place queued jobs on this pool's own idle members; a local
// job with no idle match may evict the most recently started flocked guest.
// Locality is strict: a pool prefers reclaiming its own hardware over
// sending the job away, so preemption is tried before any flocking.
inline NegotiationResult negotiate_local(GridState& state, const std::string& pool_id, double now) {
  NegotiationResult result;
  Pool& pool = state.pool(pool_id);
  for (std::uint64_t job_id : detail::consideration_order(state, pool)) {
    Job& job = state.job(job_id);
    if (auto node = detail::pick_idle(state, pool, job)) {
      result.assignments.push_back(detail::assign(state, pool_id, job_id, *node, now));
      continue;
    }
    if (job.origin_pool != pool_id) continue;
    // Victim: matching member running a flocked job, latest start, then
    // smaller node id so equal-time starts resolve deterministically.
    std::optional<NodeId> victim_node;
    double victim_start = 0.0;
    for (const NodeId& member : pool.members) {
      auto run = state.running.find(member);
      if (run == state.running.end()) continue;
      if (run->second.origin != AssignmentOrigin::Flocked) continue;
      if (!state.nodes.at(member).available) continue;
      if (!classad::symmetric_match(job.ad, state.nodes.at(member).ad)) continue;
      if (!victim_node || run->second.start_time > victim_start ||
          (run->second.start_time == victim_start && member < *victim_node)) {
        victim_node = member;
        victim_start = run->second.start_time;
      }
    }
    if (victim_node) {
      std::uint64_t victim_id = requeue_preempted(state, *victim_node, now);
      result.preemptions.push_back(PreemptionEvent{victim_id, *victim_node, now, victim_start});
      result.assignments.push_back(detail::assign(state, pool_id, job_id, *victim_node, now));
    }
  }
  return result;
}

// Flock phase: whatever is still queued tries the flock targets in order.
inline std::vector<Assignment> negotiate_flock(GridState& state, const std::string& pool_id,
                                               double now) {
  std::vector<Assignment> assignments;
  Pool& pool = state.pool(pool_id);
  for (std::uint64_t job_id : detail::consideration_order(state, pool)) {
    Job& job = state.job(job_id);
    for (const std::string& target : pool.flock_targets) {
      if (auto node = detail::pick_idle(state, state.pool(target), job)) {
        assignments.push_back(detail::assign(state, pool_id, job_id, *node, now));
        break;
      }
    }
  }
  return assignments;
}

// One pool's full negotiation pass. The simulation driver interleaves the
// two phases across pools instead (all local phases before any flocking) so
// that no pool's guests grab members another pool's locals need this tick.
inline NegotiationResult negotiate_cycle(GridState& state, const std::string& pool_id, double now) {
  NegotiationResult result = negotiate_local(state, pool_id, now);
  for (Assignment& a : negotiate_flock(state, pool_id, now)) result.assignments.push_back(a);
  return result;
}

}  // namespace archer::gridpool
