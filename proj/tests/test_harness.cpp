#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/harness/config.hpp"
#include "archer/harness/report.hpp"
#include "archer/harness/runner.hpp"
#include "archer/sim/engine.hpp"

namespace fs = std::filesystem;
using namespace archer;
using nlohmann::json;

namespace {

fs::path source_root() { return fs::path(ARCHERSIM_SOURCE_DIR); }

fs::path profile_path(const std::string& name) {
  return source_root() / "data" / "profiles" / (name + ".json");
}

json minimal_config() {
  return json::parse(R"({
    "experiment": {
      "name": "tiny",
      "overhead": "none",
      "job_groups": [
        {"owner": "t", "pool": "p", "count": 2, "work_units": 120.0}
      ]
    },
    "pools": [{"id": "p", "negotiation_interval_seconds": 60.0}],
    "sites": [{"name": "s", "pool": "p", "nodes": 1, "speed": 1.0}]
  })");
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("harness-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

}  // namespace

TEST_CASE("minimal config parses with defaults filled in") {
  harness::ExperimentConfig cfg = harness::parse_config(minimal_config());
  CHECK(cfg.name == "tiny");
  CHECK(cfg.profile.pools.size() == 1);
  CHECK(cfg.profile.sites.size() == 1);
  CHECK(cfg.profile.job_groups.size() == 1);
  CHECK(cfg.profile.overhead.multiplier == 1.0);
  CHECK(cfg.profile.submit_link_delay == 5.0);
  CHECK(cfg.overlay.nodes == 64);
  CHECK(cfg.overlay.bits == 16);
  CHECK(cfg.overlay.frac_public == 0.4);
  CHECK(cfg.output.summary == "summary.json");
  CHECK(cfg.output.trace == "trace.jsonl");
  CHECK(cfg.output.cdf == "cdf.csv");
  CHECK(cfg.echo.at("experiment").at("name") == "tiny");
}

TEST_CASE("config violations are all reported in one pass") {
  json doc = minimal_config();
  doc["experiment"]["overhead"] = 0.5;
  doc["experiment"]["job_groups"][0]["work_units"] = 0.0;
  doc["experiment"]["job_groups"][0]["work_jitter"] = 1.5;
  doc["experiment"]["job_groups"][0]["requirements"] = "other.Memory >=";
  doc["pools"].push_back({{"id", "p"}});
  doc["pools"].push_back({{"id", "q"}, {"flock_targets", {"q", "ghost"}}});
  doc["sites"][0]["nodes"] = 0;
  doc["sites"][0]["speed"] = -2.0;
  doc["overlay"] = {{"bits", 2}, {"nat_mix", {{"public", 0.9}, {"cone", 0.3}, {"symmetric", 0.2}}}};

  harness::ExperimentConfig cfg;
  std::vector<std::string> errs = harness::config_violations(doc, cfg);
  auto has = [&](const std::string& needle) {
    for (const std::string& e : errs)
      if (e.find(needle) != std::string::npos) return true;
    return false;
  };
  CHECK(errs.size() >= 9);
  CHECK(has("overhead: multiplier must be >= 1.0"));
  CHECK(has("work_units must be positive"));
  CHECK(has("work_jitter must be in [0, 1)"));
  CHECK(has("job_groups[0].requirements"));
  CHECK(has("duplicate pool id 'p'"));
  CHECK(has("pools[2]: flocks to itself"));
  CHECK(has("unknown flock target 'ghost'"));
  CHECK(has("nodes must be positive"));
  CHECK(has("speed must be positive"));
  CHECK(has("overlay.bits: must be in [4, 160]"));
  CHECK(has("overlay.nat_mix: fractions must be non-negative and sum to 1"));

  CHECK_THROWS_MATCHES(
      harness::parse_config(doc), sim::ConfigError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::StartsWith("invalid config (") &&
          Catch::Matchers::ContainsSubstring("violations):\n  - ")));
}

TEST_CASE("declared totals must match the layout") {
  json doc = minimal_config();
  doc["experiment"]["n_jobs"] = 7;
  doc["experiment"]["n_nodes"] = 99;

  harness::ExperimentConfig cfg;
  std::vector<std::string> errs = harness::config_violations(doc, cfg);
  REQUIRE(errs.size() == 2);
  CHECK(errs[0] == "experiment.n_jobs: declared 7 but job groups sum to 2");
  CHECK(errs[1] == "experiment.n_nodes: declared 99 but sites sum to 1");
}

TEST_CASE("mistyped fields name their JSON path") {
  json doc = minimal_config();
  doc["experiment"]["name"] = 12;
  doc["sites"][0]["nodes"] = "many";

  harness::ExperimentConfig cfg;
  std::vector<std::string> errs = harness::config_violations(doc, cfg);
  auto has = [&](const std::string& needle) {
    for (const std::string& e : errs)
      if (e.find(needle) != std::string::npos) return true;
    return false;
  };
  CHECK(has("config.experiment.name: expected string, got number"));
  CHECK(has("sites[0].nodes: expected integer, got string"));
}

TEST_CASE("config file errors carry the path and line") {
  CHECK_THROWS_MATCHES(harness::load_config("/does/not/exist.json"), sim::ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::StartsWith("cannot open config file:")));

  TempDir tmp;
  const fs::path bad = tmp.path / "bad.json";
  std::ofstream(bad) << "{\n  \"experiment\": {\n  oops\n}\n";
  CHECK_THROWS_MATCHES(
      harness::load_config(bad), sim::ConfigError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("bad.json:3: config parse error:")));
}

TEST_CASE("built-in profiles load cleanly and match their declared totals") {
  for (const std::string name : {"fig2", "fig2-serial", "scenario1"}) {
    INFO("profile " << name);
    harness::ExperimentConfig cfg = harness::load_config(profile_path(name));
    CHECK(cfg.name == name);
    CHECK(cfg.profile.n_jobs == cfg.profile.group_job_total());
    CHECK(cfg.profile.n_nodes == cfg.profile.site_node_total());
    CHECK(cfg.profile.n_jobs > 0);
    CHECK(cfg.profile.n_nodes > 0);
  }
}

TEST_CASE("reference workload lands near its published shape") {
  harness::ExperimentConfig cfg = harness::load_config(profile_path("fig2"));
  harness::Report report = harness::run_experiment(cfg, 1);

  CHECK(report.overall.completed == 200);
  CHECK(report.overall.median_runtime > 3800.0);
  CHECK(report.overall.median_runtime < 4400.0);
  CHECK(report.overall.mean_runtime > 4000.0);
  CHECK(report.overall.mean_runtime < 4700.0);
  CHECK(report.overall.makespan > 20000.0);
  CHECK(report.overall.makespan < 35000.0);
  CHECK(report.overall.preemption_count == 0);

  // One community of donated desktops against one submitting user.
  REQUIRE(report.owners.size() == 1);
  CHECK(report.owners[0].owner == "fig2-user");
  CHECK(report.owners[0].serial_baseline_seconds > report.overall.makespan);
  CHECK(report.speedup_vs_serial > 10.0);

  CHECK(report.overlay.nodes == 64);
  CHECK(report.overlay.pairs == 64 * 63);
  CHECK(report.overlay.delivery_rate == 1.0);
  CHECK(report.overlay.mean_hops >= 1.0);
  CHECK(report.security.legitimate_sends == 32);
  CHECK(report.security.legitimate_delivered == 32);
  CHECK(report.security.hostile_frames > 0);
  CHECK(report.security.hostile_rejected == report.security.hostile_frames);
}

TEST_CASE("a day of donated idle time covers eighty days of serial work") {
  harness::ExperimentConfig cfg = harness::load_config(profile_path("scenario1"));
  harness::Report report = harness::run_experiment(cfg, 1);

  const harness::OwnerSection* user = nullptr;
  for (const harness::OwnerSection& o : report.owners)
    if (o.owner == "user") user = &o;
  REQUIRE(user != nullptr);
  CHECK(user->metrics.completed == 160);
  CHECK(user->serial_baseline_seconds == 6912000.0);
  CHECK(user->metrics.makespan <= 86400.0);
  CHECK(user->speedup_vs_serial > 80.0);
}

TEST_CASE("back-to-back chaining on one reference node is exact") {
  // 160 jobs of 43200 units at speed 1.0: every runtime is a whole number of
  // negotiation intervals, so each completion hands the node to the next job
  // in the same tick and the makespan telescopes to one startup tick plus the
  // serial sum.
  sim::ExperimentProfile profile;
  profile.name = "degenerate";
  profile.n_jobs = 160;
  profile.n_nodes = 1;
  profile.pools.push_back({.pool_id = "solo", .flock_targets = {}, .negotiation_interval = 60.0});
  sim::SiteSpec site;
  site.name = "ref";
  site.pool_id = "solo";
  site.node_count = 1;
  site.speed = 1.0;
  profile.sites.push_back(site);
  sim::JobGroupSpec group;
  group.owner = "user";
  group.pool_id = "solo";
  group.count = 160;
  group.work = 43200.0;
  group.submit_start = 0.0;
  group.submit_gap = 0.0;
  profile.job_groups.push_back(group);

  sim::Simulation simulation(profile, 1);
  simulation.run();
  sim::Metrics metrics = sim::collect_metrics(simulation.state());
  CHECK(metrics.completed == 160);
  CHECK(metrics.makespan == 160.0 * 43200.0 + 60.0);
}

TEST_CASE("summary carries config echo and owner sections") {
  harness::ExperimentConfig cfg = harness::parse_config(minimal_config());
  harness::Report report = harness::run_experiment(cfg, 5);
  nlohmann::ordered_json j = report.summary_json();

  for (const char* key :
       {"experiment", "seed", "metrics", "serial_baseline_seconds", "speedup_vs_serial", "owners",
        "overlay", "security", "wall_seconds", "config"}) {
    INFO("key " << key);
    CHECK(j.contains(key));
  }
  CHECK(j.at("experiment") == "tiny");
  CHECK(j.at("seed") == 5);
  CHECK(j.at("metrics").at("completed") == 2);
  CHECK(j.at("owners").contains("t"));
  CHECK(j.at("owners").at("t").at("serial_baseline_seconds") == 240.0);
  CHECK(j.at("config") == nlohmann::ordered_json::parse(minimal_config().dump()));
  // Two 120-unit jobs on one unit-speed node: 60s tick + 240s of work.
  CHECK(j.at("metrics").at("makespan_seconds") == 300.0);
}

TEST_CASE("write_report produces the three configured files") {
  harness::ExperimentConfig cfg = harness::parse_config(minimal_config());
  cfg.output.summary = "s.json";
  cfg.output.trace = "t.jsonl";
  cfg.output.cdf = "c.csv";
  harness::Report report = harness::run_experiment(cfg, 2);

  TempDir tmp;
  const fs::path dir = tmp.path / "nested" / "run";
  harness::write_report(report, dir, cfg.output);

  REQUIRE(fs::exists(dir / "s.json"));
  REQUIRE(fs::exists(dir / "t.jsonl"));
  REQUIRE(fs::exists(dir / "c.csv"));

  std::ifstream sin(dir / "s.json");
  nlohmann::ordered_json round = nlohmann::ordered_json::parse(sin);
  CHECK(round.at("experiment") == "tiny");

  std::ifstream cin(dir / "c.csv");
  std::string header;
  std::getline(cin, header);
  CHECK(header == "time_seconds,jobs_completed");
  std::size_t rows = 0;
  for (std::string line; std::getline(cin, line);) ++rows;
  CHECK(rows == 2);

  std::ifstream tin(dir / "t.jsonl");
  std::size_t events = 0;
  for (std::string line; std::getline(tin, line);) {
    json rec = json::parse(line);
    CHECK(rec.contains("t"));
    CHECK(rec.contains("kind"));
    ++events;
  }
  CHECK(events >= 2 + 2 + 2);  // submits, starts, completions at minimum
}

TEST_CASE("identical seeds reproduce the report byte for byte") {
  harness::ExperimentConfig cfg = harness::load_config(profile_path("fig2"));
  harness::Report a = harness::run_experiment(cfg, 3);
  harness::Report b = harness::run_experiment(cfg, 3);
  harness::Report c = harness::run_experiment(cfg, 4);

  CHECK(a.trace_jsonl == b.trace_jsonl);
  CHECK(a.cdf_csv == b.cdf_csv);
  nlohmann::ordered_json ja = a.summary_json();
  nlohmann::ordered_json jb = b.summary_json();
  ja.erase("wall_seconds");
  jb.erase("wall_seconds");
  CHECK(ja.dump() == jb.dump());

  CHECK(a.trace_jsonl != c.trace_jsonl);
  // Overlay and security probes are seeded by the config, not the run seed.
  CHECK(a.overlay.mean_hops == c.overlay.mean_hops);
  CHECK(a.overlay.max_hops == c.overlay.max_hops);
  CHECK(a.security.hostile_rejected == c.security.hostile_rejected);
}

TEST_CASE("overlay probe is deterministic for a spec") {
  harness::OverlayProbeSpec spec;
  spec.nodes = 24;
  spec.bits = 12;
  spec.frac_public = 0.5;
  spec.frac_cone = 0.3;
  spec.frac_symmetric = 0.2;
  spec.seed = 5;

  harness::OverlayStats net1, net2;
  harness::SecurityProbeStats sec1, sec2;
  harness::detail::probe_overlay(spec, net1, sec1);
  harness::detail::probe_overlay(spec, net2, sec2);

  CHECK(net1.nodes == 24);
  CHECK(net1.pairs == 24 * 23);
  CHECK(net1.delivery_rate == 1.0);
  CHECK(net1.mean_hops >= 1.0);
  CHECK(net1.mean_hops == net2.mean_hops);
  CHECK(net1.max_hops == net2.max_hops);
  CHECK(sec1.legitimate_delivered == sec1.legitimate_sends);
  CHECK(sec1.hostile_rejected == sec1.hostile_frames);
  CHECK(sec1.hostile_frames == sec2.hostile_frames);
}
