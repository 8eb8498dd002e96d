#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/classad/parser.hpp"
#include "archer/gridpool/negotiate.hpp"
#include "archer/gridpool/pool.hpp"
#include "archer/sim/event.hpp"
#include "archer/sim/job.hpp"
#include "archer/sim/profile.hpp"
#include "archer/util/rng.hpp"

namespace archer::sim {

struct StuckQueueError : std::runtime_error {
  explicit StuckQueueError(std::vector<std::uint64_t> stuck_jobs)
      : std::runtime_error(describe(stuck_jobs)), jobs(std::move(stuck_jobs)) {}
  std::vector<std::uint64_t> jobs;

 private:
  static std::string describe(const std::vector<std::uint64_t>& ids) {
    std::ostringstream os;
    os << "queue stuck: no resource matches job(s)";
    for (std::uint64_t id : ids) os << ' ' << id;
    return os.str();
  }
};

// Deterministic discrete-event simulation of a multi-pool grid. Strictly
// single-threaded: one event loop, one logical writer of grid state.
class Simulation {
 public:
  Simulation(ExperimentProfile profile, std::uint64_t seed)
      : profile_(std::move(profile)), seed_(seed) {
    build();
  }

  // Invoked after every appended trace record; for invariant probes.
  std::function<void(const Simulation&, const TraceRecord&)> on_record;
  // Invoked after each negotiation instant completes.
  std::function<void(const Simulation&, double)> on_tick;

  void run() {
    while (!queue_.empty()) {
      SimEvent ev = queue_.pop();
      if (ev.kind != EventKind::NegotiateTick) {
        --non_tick_pending_;
        last_progress_ = ev.time;
      }
      switch (ev.kind) {
        case EventKind::Submit: handle_submit(ev); break;
        case EventKind::JobComplete: handle_complete(ev); break;
        case EventKind::NodeJoin: handle_join(ev); break;
        case EventKind::NodeLeave: handle_leave(ev); break;
        case EventKind::NegotiateTick: handle_tick(ev); break;
        default: break;  // JobStart/Preempt never enter the queue
      }
    }
  }

  const ExperimentProfile& profile() const { return profile_; }
  std::uint64_t seed() const { return seed_; }
  const gridpool::GridState& state() const { return state_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::size_t completed_count() const { return completed_; }
  double total_wasted_work() const { return total_wasted_; }
  double total_processed_work() const { return total_processed_; }

  std::string trace_jsonl() const {
    std::string out;
    for (const TraceRecord& r : trace_) {
      nlohmann::ordered_json line;
      line["t"] = r.t;
      line["kind"] = to_string(r.kind);
      if (r.job) line["job"] = *r.job;
      if (r.node) line["node"] = r.node->to_hex();
      if (!r.pool.empty()) line["pool"] = r.pool;
      out += line.dump();
      out += '\n';
    }
    return out;
  }

 private:
  void build() {
    if (profile_.pools.empty()) throw ConfigError("at least one pool is required");
    for (const PoolSpec& p : profile_.pools) state_.add_pool(p.pool_id, p.negotiation_interval);
    for (const PoolSpec& p : profile_.pools) {
      for (const std::string& target : p.flock_targets) {
        if (!state_.pools.count(target))
          throw ConfigError("pool " + p.pool_id + " flocks to unknown pool " + target);
      }
      state_.pool(p.pool_id).flock_targets = p.flock_targets;
    }

    for (const SiteSpec& site : profile_.sites) {
      if (site.node_count == 0) throw ConfigError("site " + site.name + " has zero nodes");
      for (std::size_t i = 0; i < site.node_count; ++i) {
        gridpool::Workstation ws;
        ws.id = node_id_for(site.name, i);
        ws.site = site.name;
        ws.pool_id = site.pool_id;
        ws.speed = site.speed;
        ws.ad.set("Memory", classad::Value::integer(site.memory));
        ws.ad.set("Arch", classad::Value::text(site.arch));
        ws.ad.set("Speed", classad::Value::real(site.speed));
        ws.ad.set("Site", classad::Value::text(site.name));
        ws.ad.set("PoolId", classad::Value::text(site.pool_id));
        ws.ad.set_expr("requirements", "true");
        state_.add_node(std::move(ws));
      }
    }

    // Jobs materialize up front; ids follow group order so equal submit
    // times break ties the same way every run.
    util::DetRng job_rng = util::DetRng(seed_).fork(0x6a6f6273);
    std::uint64_t next_id = 1;
    for (const JobGroupSpec& group : profile_.job_groups) {
      if (group.work <= 0.0) throw ConfigError("job group work must be positive");
      double gap = group.submit_gap >= 0.0 ? group.submit_gap : profile_.submit_link_delay;
      classad::ExprPtr requirements = parse_or_config_error(group.requirements, "requirements");
      classad::ExprPtr rank;
      if (!group.rank.empty()) rank = parse_or_config_error(group.rank, "rank");
      for (std::size_t k = 0; k < group.count; ++k) {
        Job job;
        job.job_id = next_id++;
        job.owner = group.owner;
        job.origin_pool = group.pool_id;
        double jitter = group.work_jitter > 0.0
                            ? 1.0 + group.work_jitter * (2.0 * job_rng.next_double() - 1.0)
                            : 1.0;
        job.work = group.work * jitter;
        job.submit_time = group.submit_start + static_cast<double>(k) * gap;
        job.ad.set("Owner", classad::Value::text(group.owner));
        job.ad.set("PoolId", classad::Value::text(group.pool_id));
        job.ad.set("Work", classad::Value::real(job.work));
        for (const auto& [name, source] : group.attributes) {
          job.ad.set_expr(name, parse_or_config_error(source, name));
        }
        job.ad.set_expr("requirements", requirements);
        if (rank) job.ad.set_expr("rank", rank);
        total_jobs_ += 1;
        SimEvent submit;
        submit.time = job.submit_time;
        submit.kind = EventKind::Submit;
        submit.job_id = job.job_id;
        schedule(std::move(submit));
        pending_jobs_.emplace(job.job_id, std::move(job));
      }
    }
    if (total_jobs_ == 0) throw ConfigError("no jobs to run");

    std::map<overlay::NodeId, std::pair<double, bool>> first_action;
    for (const NodeChurnSpec& churn : profile_.churn) {
      overlay::NodeId id = node_id_for(churn.site, churn.index);
      if (!state_.nodes.count(id))
        throw ConfigError("churn entry references unknown node " + churn.site);
      SimEvent ev;
      ev.time = churn.time;
      ev.kind = churn.join ? EventKind::NodeJoin : EventKind::NodeLeave;
      ev.node = id;
      schedule(std::move(ev));
      auto [it, fresh] = first_action.emplace(id, std::make_pair(churn.time, churn.join));
      if (!fresh && churn.time < it->second.first) it->second = {churn.time, churn.join};
    }
    // A node whose earliest churn action is a join starts out absent.
    for (const auto& [id, action] : first_action) {
      if (action.second && action.first > 0.0) state_.nodes.at(id).available = false;
    }

    for (const PoolSpec& p : profile_.pools) {
      if (p.negotiation_interval <= 0.0) throw ConfigError("negotiation interval must be positive");
      max_interval_ = std::max(max_interval_, p.negotiation_interval);
      SimEvent tick;
      tick.time = p.negotiation_interval;
      tick.kind = EventKind::NegotiateTick;
      tick.pool = p.pool_id;
      queue_.push(std::move(tick));
    }
  }

  static overlay::NodeId node_id_for(const std::string& site, std::size_t index) {
    return overlay::hash_to_ring(site + "/" + std::to_string(index), overlay::NodeId::kMaxBits);
  }

  static classad::ExprPtr parse_or_config_error(const std::string& source, const std::string& what) {
    try {
      return classad::parse_expr(source);
    } catch (const classad::SyntaxError& err) {
      throw ConfigError("bad " + what + " expression: " + err.what());
    }
  }

  void schedule(SimEvent ev) {
    ++non_tick_pending_;
    queue_.push(std::move(ev));
  }

  void record(double t, EventKind kind, std::optional<std::uint64_t> job,
              std::optional<overlay::NodeId> node, std::string pool) {
    trace_.push_back(TraceRecord{t, kind, job, node, std::move(pool)});
    if (on_record) on_record(*this, trace_.back());
  }

  void handle_submit(const SimEvent& ev) {
    auto it = pending_jobs_.find(ev.job_id);
    Job job = std::move(it->second);
    pending_jobs_.erase(it);
    std::string pool = job.origin_pool;
    state_.submit(std::move(job));
    record(ev.time, EventKind::Submit, ev.job_id, std::nullopt, pool);
  }

  void handle_complete(const SimEvent& ev) {
    if (ev.generation != generations_[ev.job_id]) return;  // preempted since
    Job& job = state_.job(ev.job_id);
    const gridpool::Workstation& ws = state_.nodes.at(ev.node);
    state_.running.erase(ev.node);
    job.state = JobState::Completed;
    job.completion_time = ev.time;
    completed_ += 1;
    total_processed_ += job.work;
    record(ev.time, EventKind::JobComplete, ev.job_id, ev.node, ws.pool_id);
    auto drain = drain_pending_.find(ev.node);
    if (drain != drain_pending_.end()) {
      drain_pending_.erase(drain);
      state_.nodes.at(ev.node).available = false;
      record(ev.time, EventKind::NodeLeave, std::nullopt, ev.node, ws.pool_id);
    }
  }

  void handle_join(const SimEvent& ev) {
    gridpool::Workstation& ws = state_.nodes.at(ev.node);
    drain_pending_.erase(ev.node);
    ws.available = true;
    record(ev.time, EventKind::NodeJoin, std::nullopt, ev.node, ws.pool_id);
  }

  void handle_leave(const SimEvent& ev) {
    gridpool::Workstation& ws = state_.nodes.at(ev.node);
    if (state_.running.count(ev.node)) {
      // Draining: the current job finishes, nothing new lands afterwards.
      drain_pending_.insert(ev.node);
      return;
    }
    ws.available = false;
    record(ev.time, EventKind::NodeLeave, std::nullopt, ev.node, ws.pool_id);
  }

  void handle_tick(const SimEvent& ev) {
    double now = ev.time;
    std::vector<std::string> due = {ev.pool};
    while (!queue_.empty() && queue_.top().kind == EventKind::NegotiateTick &&
           queue_.top().time == now) {
      due.push_back(queue_.pop().pool);
    }
    for (const std::string& pool : due) {
      record(now, EventKind::NegotiateTick, std::nullopt, std::nullopt, pool);
    }

    std::size_t placed = 0;
    // All local phases run before any pool may flock outward, so a pool's
    // own jobs always beat same-instant guests to its members.
    for (const std::string& pool : due) {
      gridpool::NegotiationResult res = gridpool::negotiate_local(state_, pool, now);
      apply_preemptions(res.preemptions);
      apply_assignments(res.assignments, now);
      placed += res.assignments.size();
    }
    for (const std::string& pool : due) {
      std::vector<gridpool::Assignment> flocked = gridpool::negotiate_flock(state_, pool, now);
      apply_assignments(flocked, now);
      placed += flocked.size();
    }

    if (completed_ < total_jobs_) {
      std::size_t queued = 0;
      for (const auto& [id, pool] : state_.pools) queued += pool.queue.size();
      // Stuck only once every pool has renegotiated against unchanged state:
      // with nothing running, no event pending, and a full round of empty
      // negotiations behind us, no future tick can place anything either.
      if (placed == 0 && queued > 0 && state_.running.empty() && non_tick_pending_ == 0 &&
          now - last_progress_ >= max_interval_ - 1e-9) {
        std::vector<std::uint64_t> stuck;
        for (const auto& [id, pool] : state_.pools)
          stuck.insert(stuck.end(), pool.queue.begin(), pool.queue.end());
        std::sort(stuck.begin(), stuck.end());
        throw StuckQueueError(std::move(stuck));
      }
      for (const std::string& pool : due) {
        SimEvent tick;
        tick.time = now + state_.pool(pool).negotiation_interval;
        tick.kind = EventKind::NegotiateTick;
        tick.pool = pool;
        queue_.push(std::move(tick));
      }
    }
    if (on_tick) on_tick(*this, now);
  }

  void apply_preemptions(const std::vector<gridpool::PreemptionEvent>& preemptions) {
    for (const gridpool::PreemptionEvent& p : preemptions) {
      const gridpool::Workstation& ws = state_.nodes.at(p.node_id);
      double lost = (p.time - p.victim_start) * ws.speed / profile_.overhead.multiplier;
      Job& victim = state_.job(p.victim_job_id);
      victim.wasted_work += lost;
      total_wasted_ += lost;
      total_processed_ += lost;
      generations_[p.victim_job_id] += 1;  // invalidates the pending completion
      record(p.time, EventKind::Preempt, p.victim_job_id, p.node_id, ws.pool_id);
    }
  }

  void apply_assignments(const std::vector<gridpool::Assignment>& assignments, double now) {
    for (const gridpool::Assignment& a : assignments) {
      const gridpool::Workstation& ws = state_.nodes.at(a.node_id);
      Job& job = state_.job(a.job_id);
      std::uint64_t gen = ++generations_[a.job_id];
      SimEvent done;
      done.time = now + job_runtime(job.work, ws.speed, profile_.overhead);
      done.kind = EventKind::JobComplete;
      done.job_id = a.job_id;
      done.generation = gen;
      done.node = a.node_id;
      schedule(std::move(done));
      record(now, EventKind::JobStart, a.job_id, a.node_id, ws.pool_id);
    }
  }

  ExperimentProfile profile_;
  std::uint64_t seed_;
  gridpool::GridState state_;
  EventQueue queue_;
  std::vector<TraceRecord> trace_;
  std::map<std::uint64_t, Job> pending_jobs_;
  std::map<std::uint64_t, std::uint64_t> generations_;
  std::set<overlay::NodeId> drain_pending_;
  std::size_t total_jobs_ = 0;
  std::size_t completed_ = 0;
  std::size_t non_tick_pending_ = 0;
  double max_interval_ = 0.0;
  double last_progress_ = 0.0;
  double total_wasted_ = 0.0;
  double total_processed_ = 0.0;
};

}  // namespace archer::sim
