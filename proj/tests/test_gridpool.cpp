#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "archer/classad/match.hpp"
#include "archer/gridpool/negotiate.hpp"
#include "archer/gridpool/pool.hpp"
#include "archer/util/rng.hpp"

using namespace archer;
using util::DetRng;
using gridpool::ActiveRun;
using gridpool::GridState;
using gridpool::NegotiationResult;
using gridpool::Workstation;
using overlay::NodeId;
using sim::Assignment;
using sim::AssignmentOrigin;
using sim::Job;
using sim::JobState;

namespace {

Workstation make_node(std::uint64_t id, const std::string& pool, double speed = 1.0,
                      std::int64_t memory = 2048, const std::string& arch = "x86") {
  Workstation ws;
  ws.id = NodeId::from_u64(id);
  ws.site = "site-" + pool;
  ws.pool_id = pool;
  ws.speed = speed;
  ws.ad.set("Memory", classad::Value::integer(memory));
  ws.ad.set("Arch", classad::Value::text(arch));
  ws.ad.set("Speed", classad::Value::real(speed));
  ws.ad.set("Site", classad::Value::text(ws.site));
  ws.ad.set("PoolId", classad::Value::text(pool));
  ws.ad.set_expr("requirements", "true");
  return ws;
}

Job make_job(std::uint64_t id, const std::string& pool, double submit, double work = 100.0,
             const std::string& requirements = "true", const std::string& rank = "") {
  Job job;
  job.job_id = id;
  job.owner = "user";
  job.origin_pool = pool;
  job.work = work;
  job.submit_time = submit;
  job.ad.set("Owner", classad::Value::text("user"));
  job.ad.set("PoolId", classad::Value::text(pool));
  job.ad.set_expr("requirements", requirements);
  if (!rank.empty()) job.ad.set_expr("rank", rank);
  return job;
}

// Puts a job directly into Running state on a node, bypassing negotiation.
void force_run(GridState& state, std::uint64_t node, std::uint64_t job_id, double start,
               AssignmentOrigin origin) {
  NodeId nid = NodeId::from_u64(node);
  Job& job = state.job(job_id);
  auto& queue = state.pool(job.origin_pool).queue;
  queue.erase(std::find(queue.begin(), queue.end(), job_id));
  job.state = JobState::Running;
  job.last_start_time = start;
  job.history.push_back(Assignment{job_id, nid, start, origin});
  state.running[nid] = ActiveRun{job_id, start, origin};
}

// ---------------------------------------------------------------------------
// Reference scheduler. Re-derives the negotiation policy with plain loops:
// jobs in (local-first, submit, id) order; per job, tier 1 idle local by
// rank, tier 2 preempt newest flocked guest, tier 3 flock targets in order.

struct OracleOutcome {
  std::vector<std::pair<std::uint64_t, NodeId>> assignments;
  std::vector<std::pair<std::uint64_t, NodeId>> preemptions;
};

OracleOutcome oracle_cycle(GridState st, const std::string& pool_id, double now) {
  OracleOutcome out;
  const gridpool::Pool& pool = st.pool(pool_id);

  std::vector<std::uint64_t> order = pool.queue;
  std::sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
    const Job& ja = st.jobs.at(a);
    const Job& jb = st.jobs.at(b);
    bool la = ja.origin_pool == pool_id;
    bool lb = jb.origin_pool == pool_id;
    if (la != lb) return la;
    if (ja.submit_time != jb.submit_time) return ja.submit_time < jb.submit_time;
    return a < b;
  });

  auto idle_pick = [&](const std::string& in_pool, const Job& job) -> std::optional<NodeId> {
    std::optional<NodeId> best;
    double best_score = 0.0;
    for (const NodeId& id : st.pool(in_pool).members) {
      const Workstation& ws = st.nodes.at(id);
      if (!ws.available || st.running.count(id)) continue;
      if (!classad::symmetric_match(job.ad, ws.ad)) continue;
      double score = classad::rank_score(job.ad, ws.ad);
      if (!best || score > best_score || (score == best_score && id < *best)) {
        best = id;
        best_score = score;
      }
    }
    return best;
  };

  for (std::uint64_t job_id : order) {
    const Job& job = st.jobs.at(job_id);
    std::optional<NodeId> target = idle_pick(pool_id, job);
    bool preempted = false;
    if (!target && job.origin_pool == pool_id) {
      std::optional<NodeId> victim_node;
      for (const NodeId& id : pool.members) {
        auto run = st.running.find(id);
        if (run == st.running.end() || run->second.origin != AssignmentOrigin::Flocked) continue;
        if (!st.nodes.at(id).available) continue;
        if (!classad::symmetric_match(job.ad, st.nodes.at(id).ad)) continue;
        if (!victim_node || run->second.start_time > st.running.at(*victim_node).start_time ||
            (run->second.start_time == st.running.at(*victim_node).start_time &&
             id < *victim_node)) {
          victim_node = id;
        }
      }
      if (victim_node) {
        out.preemptions.emplace_back(st.running.at(*victim_node).job_id, *victim_node);
        st.running.erase(*victim_node);
        target = victim_node;
        preempted = true;
      }
    }
    if (!target) {
      for (const std::string& flock : pool.flock_targets) {
        target = idle_pick(flock, job);
        if (target) break;
      }
    }
    if (!target) continue;
    (void)preempted;
    const Workstation& ws = st.nodes.at(*target);
    AssignmentOrigin origin = ws.pool_id == job.origin_pool ? AssignmentOrigin::Local
                                                            : AssignmentOrigin::Flocked;
    st.running[*target] = ActiveRun{job_id, now, origin};
    out.assignments.emplace_back(job_id, *target);
  }
  return out;
}

std::vector<std::pair<std::uint64_t, NodeId>> sorted_pairs(const std::vector<Assignment>& v) {
  std::vector<std::pair<std::uint64_t, NodeId>> out;
  for (const Assignment& a : v) out.emplace_back(a.job_id, a.node_id);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("one idle matching local node takes the one queued job", "[gridpool]") {
  GridState st;
  st.add_pool("main");
  st.add_node(make_node(10, "main"));
  st.submit(make_job(1, "main", 0.0));

  NegotiationResult res = gridpool::negotiate_cycle(st, "main", 60.0);
  REQUIRE(res.assignments.size() == 1);
  CHECK(res.assignments[0].job_id == 1);
  CHECK(res.assignments[0].node_id == NodeId::from_u64(10));
  CHECK(res.assignments[0].origin == AssignmentOrigin::Local);
  CHECK(res.preemptions.empty());
  CHECK(st.job(1).state == JobState::Running);
  CHECK(st.pool("main").queue.empty());
  CHECK(st.running.count(NodeId::from_u64(10)) == 1);
}

TEST_CASE("local job preempts the most recently started flocked guest", "[gridpool]") {
  GridState st;
  st.add_pool("main");
  st.add_pool("remote");
  st.add_node(make_node(10, "main"));
  st.add_node(make_node(11, "main"));

  st.submit(make_job(100, "remote", 0.0, 1000.0));
  st.submit(make_job(101, "remote", 0.0, 1000.0));
  force_run(st, 10, 100, 60.0, AssignmentOrigin::Flocked);
  force_run(st, 11, 101, 120.0, AssignmentOrigin::Flocked);

  st.submit(make_job(1, "main", 150.0));
  NegotiationResult res = gridpool::negotiate_cycle(st, "main", 180.0);

  REQUIRE(res.preemptions.size() == 1);
  CHECK(res.preemptions[0].victim_job_id == 101);  // started at 120, newer
  CHECK(res.preemptions[0].node_id == NodeId::from_u64(11));
  CHECK(res.preemptions[0].victim_start == 120.0);
  CHECK(std::string(res.preemptions[0].reason) == "local-priority");

  REQUIRE(res.assignments.size() == 1);
  CHECK(res.assignments[0].job_id == 1);
  CHECK(res.assignments[0].node_id == NodeId::from_u64(11));
  CHECK(res.assignments[0].origin == AssignmentOrigin::Local);

  // Victim went home with its work intact and a bumped preemption count.
  const Job& victim = st.job(101);
  CHECK(victim.state == JobState::Queued);
  CHECK(victim.preemption_count == 1);
  CHECK(victim.work == 1000.0);
  auto& remote_queue = st.pool("remote").queue;
  CHECK(std::count(remote_queue.begin(), remote_queue.end(), 101) == 1);
}

TEST_CASE("equal start times break preemption ties toward the smaller node", "[gridpool]") {
  GridState st;
  st.add_pool("main");
  st.add_pool("remote");
  st.add_node(make_node(21, "main"));
  st.add_node(make_node(20, "main"));
  st.submit(make_job(100, "remote", 0.0));
  st.submit(make_job(101, "remote", 0.0));
  force_run(st, 21, 100, 60.0, AssignmentOrigin::Flocked);
  force_run(st, 20, 101, 60.0, AssignmentOrigin::Flocked);

  st.submit(make_job(1, "main", 70.0));
  NegotiationResult res = gridpool::negotiate_cycle(st, "main", 120.0);
  REQUIRE(res.preemptions.size() == 1);
  CHECK(res.preemptions[0].node_id == NodeId::from_u64(20));
  CHECK(res.preemptions[0].victim_job_id == 101);
}

TEST_CASE("a local guest is never preempted", "[gridpool]") {
  GridState st;
  st.add_pool("main");
  st.add_node(make_node(10, "main"));
  st.submit(make_job(100, "main", 0.0));
  force_run(st, 10, 100, 60.0, AssignmentOrigin::Local);

  st.submit(make_job(1, "main", 70.0));
  NegotiationResult res = gridpool::negotiate_cycle(st, "main", 120.0);
  CHECK(res.assignments.empty());
  CHECK(res.preemptions.empty());
  CHECK(st.job(1).state == JobState::Queued);

  // Forcing the issue is an internal invariant violation.
  CHECK_THROWS_AS(gridpool::requeue_preempted(st, NodeId::from_u64(10), 120.0),
                  std::logic_error);
}

TEST_CASE("flock candidates list local idles then targets in order", "[gridpool]") {
  GridState st;
  st.add_pool("a");
  st.add_pool("b");
  st.add_pool("c");
  st.pool("a").flock_targets = {"b", "c"};
  st.pool("b").flock_targets = {"c", "a"};
  st.pool("c").flock_targets = {"a", "b"};

  st.add_node(make_node(1, "a"));
  st.add_node(make_node(2, "a", 1.0, 512));  // too small for picky jobs
  st.add_node(make_node(3, "b"));
  st.add_node(make_node(4, "c"));
  st.add_node(make_node(5, "c"));

  Job picky = make_job(1, "a", 0.0, 100.0, "other.Memory >= 1024");
  st.submit(picky);

  SECTION("triangle ordering matches the hand enumeration") {
    auto got = gridpool::flock_candidates(st, "a", st.job(1));
    std::vector<NodeId> want = {NodeId::from_u64(1), NodeId::from_u64(3), NodeId::from_u64(4),
                                NodeId::from_u64(5)};
    CHECK(got == want);

    got = gridpool::flock_candidates(st, "b", st.job(1));
    want = {NodeId::from_u64(3), NodeId::from_u64(4), NodeId::from_u64(5), NodeId::from_u64(1)};
    CHECK(got == want);

    got = gridpool::flock_candidates(st, "c", st.job(1));
    want = {NodeId::from_u64(4), NodeId::from_u64(5), NodeId::from_u64(1), NodeId::from_u64(3)};
    CHECK(got == want);
  }

  SECTION("empty flock target list keeps it local") {
    st.pool("a").flock_targets.clear();
    auto got = gridpool::flock_candidates(st, "a", st.job(1));
    CHECK(got == std::vector<NodeId>{NodeId::from_u64(1)});
  }

  SECTION("all local busy, one remote idle") {
    st.submit(make_job(50, "a", 0.0));
    st.submit(make_job(51, "a", 0.0));
    force_run(st, 1, 50, 0.0, AssignmentOrigin::Local);
    force_run(st, 2, 51, 0.0, AssignmentOrigin::Local);
    st.pool("a").flock_targets = {"b"};
    auto got = gridpool::flock_candidates(st, "a", st.job(1));
    CHECK(got == std::vector<NodeId>{NodeId::from_u64(3)});
  }
}

TEST_CASE("flocked assignment goes to the first target with capacity", "[gridpool]") {
  GridState st;
  st.add_pool("a");
  st.add_pool("b");
  st.add_pool("c");
  st.pool("a").flock_targets = {"b", "c"};
  st.add_node(make_node(30, "b"));
  st.add_node(make_node(31, "c", 9.0));  // faster, but b comes first

  st.submit(make_job(1, "a", 0.0, 100.0, "true", "other.Speed"));
  NegotiationResult res = gridpool::negotiate_cycle(st, "a", 60.0);
  REQUIRE(res.assignments.size() == 1);
  CHECK(res.assignments[0].node_id == NodeId::from_u64(30));
  CHECK(res.assignments[0].origin == AssignmentOrigin::Flocked);
}

TEST_CASE("rank picks the best local candidate before any flocking", "[gridpool]") {
  GridState st;
  st.add_pool("a");
  st.add_pool("b");
  st.pool("a").flock_targets = {"b"};
  st.add_node(make_node(10, "a", 1.0));
  st.add_node(make_node(11, "a", 2.0));
  st.add_node(make_node(12, "b", 50.0));

  st.submit(make_job(1, "a", 0.0, 100.0, "true", "other.Speed"));
  NegotiationResult res = gridpool::negotiate_cycle(st, "a", 60.0);
  REQUIRE(res.assignments.size() == 1);
  // Local node 11 wins despite the much faster remote node.
  CHECK(res.assignments[0].node_id == NodeId::from_u64(11));
  CHECK(res.assignments[0].origin == AssignmentOrigin::Local);
}

TEST_CASE("preemption is preferred over flocking for local jobs", "[gridpool]") {
  GridState st;
  st.add_pool("a");
  st.add_pool("b");
  st.pool("a").flock_targets = {"b"};
  st.add_node(make_node(10, "a"));
  st.add_node(make_node(20, "b"));  // idle remote capacity exists

  st.submit(make_job(100, "b", 0.0, 1000.0));
  force_run(st, 10, 100, 60.0, AssignmentOrigin::Flocked);

  st.submit(make_job(1, "a", 70.0));
  NegotiationResult res = gridpool::negotiate_cycle(st, "a", 120.0);
  REQUIRE(res.preemptions.size() == 1);
  REQUIRE(res.assignments.size() == 1);
  // The pool reclaims its own hardware rather than sending the job away.
  CHECK(res.assignments[0].node_id == NodeId::from_u64(10));
  CHECK(res.assignments[0].origin == AssignmentOrigin::Local);
  CHECK(st.running.count(NodeId::from_u64(20)) == 0);
}

TEST_CASE("no remote starvation when idle capacity covers the queue", "[gridpool]") {
  GridState st;
  st.add_pool("feeder");
  st.add_pool("farm");
  st.pool("feeder").flock_targets = {"farm"};
  for (std::uint64_t n = 0; n < 5; ++n) st.add_node(make_node(10 + n, "farm"));
  for (std::uint64_t j = 1; j <= 4; ++j) st.submit(make_job(j, "feeder", 0.0));

  NegotiationResult res = gridpool::negotiate_cycle(st, "feeder", 60.0);
  CHECK(res.assignments.size() == 4);
  CHECK(st.pool("feeder").queue.empty());
  for (const Assignment& a : res.assignments) CHECK(a.origin == AssignmentOrigin::Flocked);
}

TEST_CASE("negotiation matches the reference scheduler on random instances", "[gridpool]") {
  DetRng rng(0x9e2d70c4u);
  for (int round = 0; round < 300; ++round) {
    GridState st;
    st.add_pool("alpha");
    st.add_pool("beta");
    st.pool("alpha").flock_targets = {"beta"};
    st.pool("beta").flock_targets = {"alpha"};

    const std::vector<std::int64_t> memories = {512, 1024, 2048, 4096};
    const std::vector<std::string> arches = {"x86", "arm"};
    std::uint64_t node_seq = 1;
    std::vector<NodeId> all_nodes;
    for (std::string pool : {"alpha", "beta"}) {
      std::size_t count = 1 + rng.next_below(5);
      for (std::size_t i = 0; i < count; ++i) {
        Workstation ws = make_node(node_seq++, pool, 1.0 + 0.5 * rng.next_below(4),
                                   memories[rng.next_below(memories.size())],
                                   arches[rng.next_below(arches.size())]);
        all_nodes.push_back(ws.id);
        st.add_node(std::move(ws));
      }
    }

    const std::vector<std::string> requirement_pool = {
        "true",
        "other.Memory >= 1024",
        "other.Memory >= 2048",
        "other.Arch == \"x86\"",
        "other.Memory >= 1024 && other.Arch == \"x86\"",
    };
    const std::vector<std::string> rank_pool = {"", "other.Speed", "other.Memory"};

    std::uint64_t next_job = 1;
    for (std::string pool : {"alpha", "beta"}) {
      std::size_t count = rng.next_below(7);
      for (std::size_t i = 0; i < count; ++i) {
        st.submit(make_job(next_job++, pool, rng.next_below(100) / 10.0,
                           50.0 + rng.next_below(200),
                           requirement_pool[rng.next_below(requirement_pool.size())],
                           rank_pool[rng.next_below(rank_pool.size())]));
      }
    }

    for (const NodeId& node : all_nodes) {
      std::uint64_t pick = rng.next_below(3);
      if (pick == 0) continue;
      const std::string& node_pool = st.nodes.at(node).pool_id;
      bool flocked = pick == 2;
      std::string origin = flocked ? (node_pool == "alpha" ? "beta" : "alpha") : node_pool;
      std::uint64_t filler_id = next_job++;
      st.submit(make_job(filler_id, origin, 0.0, 500.0));
      force_run(st, node.low64(), filler_id, 10.0 * rng.next_below(6),
                flocked ? AssignmentOrigin::Flocked : AssignmentOrigin::Local);
    }

    const std::string negotiating = rng.next_below(2) == 0 ? "alpha" : "beta";
    GridState oracle_input = st;  // deep copy before mutation
    NegotiationResult got = gridpool::negotiate_cycle(st, negotiating, 60.0);
    OracleOutcome want = oracle_cycle(std::move(oracle_input), negotiating, 60.0);

    CAPTURE(round, negotiating);
    std::vector<std::pair<std::uint64_t, NodeId>> want_sorted = want.assignments;
    std::sort(want_sorted.begin(), want_sorted.end());
    CHECK(sorted_pairs(got.assignments) == want_sorted);

    std::vector<std::pair<std::uint64_t, NodeId>> got_preempts;
    for (const auto& p : got.preemptions) got_preempts.emplace_back(p.victim_job_id, p.node_id);
    CHECK(got_preempts == want.preemptions);

    // Policy closure: afterwards no queued local job still matches a member
    // running a flocked guest, and no node holds two assignments.
    const gridpool::Pool& pool = st.pool(negotiating);
    for (std::uint64_t queued : pool.queue) {
      const Job& job = st.jobs.at(queued);
      if (job.origin_pool != negotiating) continue;
      for (const NodeId& member : pool.members) {
        auto run = st.running.find(member);
        if (run == st.running.end() || run->second.origin != AssignmentOrigin::Flocked) continue;
        CHECK_FALSE(classad::symmetric_match(job.ad, st.nodes.at(member).ad));
      }
    }
    std::size_t running_jobs = 0;
    for (const auto& [id, job] : st.jobs)
      if (job.state == JobState::Running) ++running_jobs;
    CHECK(running_jobs == st.running.size());
  }
}

TEST_CASE("negotiation is deterministic", "[gridpool]") {
  auto build_and_run = [] {
    GridState st;
    st.add_pool("a");
    st.add_pool("b");
    st.pool("a").flock_targets = {"b"};
    for (std::uint64_t n = 1; n <= 4; ++n) st.add_node(make_node(n, n <= 2 ? "a" : "b"));
    for (std::uint64_t j = 1; j <= 5; ++j)
      st.submit(make_job(j, "a", static_cast<double>(j), 100.0, "true", "other.Speed"));
    NegotiationResult res = gridpool::negotiate_cycle(st, "a", 60.0);
    return sorted_pairs(res.assignments);
  };
  CHECK(build_and_run() == build_and_run());
}
