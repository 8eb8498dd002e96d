// Command-line front end: simulation runs, overlay health demos, matchmaking
// checks, and report inspection. Exit codes: 0 success, 1 error, 2 no-match
// (match check only).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "archer/classad/ad.hpp"
#include "archer/classad/match.hpp"
#include "archer/harness/config.hpp"
#include "archer/harness/report.hpp"
#include "archer/harness/runner.hpp"
#include "archer/overlay/network.hpp"
#include "archer/secnet/mock_suite.hpp"

namespace fs = std::filesystem;
using namespace archer;

namespace {

fs::path find_profile(const std::string& name) {
  std::vector<fs::path> candidates;
  if (const char* dir = std::getenv("ARCHERSIM_PROFILE_DIR"))
    candidates.push_back(fs::path(dir) / (name + ".json"));
  candidates.push_back(fs::path("data/profiles") / (name + ".json"));
#ifdef ARCHERSIM_SOURCE_DIR
  candidates.push_back(fs::path(ARCHERSIM_SOURCE_DIR) / "data/profiles" / (name + ".json"));
#endif
  for (const fs::path& p : candidates) {
    if (fs::exists(p)) return p;
  }
  throw sim::ConfigError("built-in profile '" + name + "' not found (looked in data/profiles)");
}

std::uint64_t effective_seed(std::uint64_t cli_seed) {
  if (const char* env = std::getenv("ARCHERSIM_SEED")) {
    std::string s(env);
    if (!s.empty()) {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(s, &used);
      if (used != s.size()) throw sim::ConfigError("ARCHERSIM_SEED is not an integer: " + s);
      return v;
    }
  }
  return cli_seed;
}

void print_report_line(const harness::Report& r, const fs::path& dir) {
  std::cout << r.name << " seed=" << r.seed << ": " << r.overall.completed << " jobs"
            << std::fixed << std::setprecision(1) << ", makespan " << r.overall.makespan
            << " s, median " << r.overall.median_runtime << " s, mean " << r.overall.mean_runtime
            << " s, steady " << r.overall.steady_state_intercompletion << " s, preemptions "
            << r.overall.preemption_count << std::defaultfloat << " -> " << dir.string() << "\n";
}

harness::Report run_to_dir(const harness::ExperimentConfig& cfg, std::uint64_t seed,
                           const fs::path& out_root) {
  harness::Report report = harness::run_experiment(cfg, seed);
  const fs::path dir = out_root / (cfg.name + "-seed" + std::to_string(seed));
  harness::write_report(report, dir, cfg.output);
  print_report_line(report, dir);
  return report;
}

int run_command(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
                const std::string& sweep) {
  const harness::ExperimentConfig cfg = harness::load_config(config_path);
  const fs::path out_root = out_dir.empty() ? fs::path("out") : fs::path(out_dir);

  if (sweep.empty()) {
    run_to_dir(cfg, effective_seed(seed), out_root);
    return 0;
  }

  const auto dots = sweep.find("..");
  if (dots == std::string::npos)
    throw sim::ConfigError("bad --sweep range '" + sweep + "', expected A..B");
  const std::uint64_t lo = std::stoull(sweep.substr(0, dots));
  const std::uint64_t hi = std::stoull(sweep.substr(dots + 2));
  if (hi < lo || hi - lo >= 64) throw sim::ConfigError("sweep range must be ascending and < 64 seeds");

  // Independent runs may go wide; each simulation stays single-threaded.
  std::vector<std::future<harness::Report>> futures;
  for (std::uint64_t s = lo; s <= hi; ++s) {
    futures.push_back(std::async(std::launch::async, [&cfg, s] {
      return harness::run_experiment(cfg, s);
    }));
  }
  nlohmann::ordered_json sweep_json = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < futures.size(); ++i) {
    harness::Report report = futures[i].get();
    const fs::path dir = out_root / (cfg.name + "-seed" + std::to_string(report.seed));
    harness::write_report(report, dir, cfg.output);
    print_report_line(report, dir);
    nlohmann::ordered_json row;
    row["seed"] = report.seed;
    row["metrics"] = report.overall.to_json();
    sweep_json.push_back(std::move(row));
  }
  fs::create_directories(out_root);
  std::ofstream sweep_out(out_root / (cfg.name + "-sweep.json"), std::ios::binary);
  sweep_out << sweep_json.dump(2) << "\n";
  std::cout << "sweep summary -> " << (out_root / (cfg.name + "-sweep.json")).string() << "\n";
  return 0;
}

int overlay_demo(std::size_t nodes, unsigned bits, std::uint64_t seed, std::size_t pairs,
                 double frac_public, double frac_cone, double frac_symmetric, double churn) {
  using Net = overlay::Network<secnet::MockSuite>;
  typename Net::Config cfg;
  cfg.ring_bits = bits;
  cfg.seed = seed;
  Net net(cfg);

  harness::OverlayProbeSpec mix;
  mix.frac_public = frac_public;
  mix.frac_cone = frac_cone;
  mix.frac_symmetric = frac_symmetric;
  util::DetRng rng(seed);
  std::vector<overlay::NodeId> ids;
  for (std::size_t i = 0; i < nodes; ++i) {
    overlay::NodeSpec spec;
    spec.site = "demo";
    spec.pool = "archer";
    spec.nat = harness::detail::draw_nat(mix, rng);
    ids.push_back(ids.empty() ? net.join(spec)
                              : net.join(spec, std::span<const overlay::NodeId>(&ids[0], 1)));
  }
  net.stabilize();

  auto measure = [&](const char* label) {
    overlay::DeliveryStats d =
        pairs == 0 ? net.all_pairs_delivery() : net.sample_pairs(pairs, rng);
    std::cout << label << ": " << net.size() << " nodes, " << d.attempted << " routed pairs, "
              << std::fixed << std::setprecision(4) << "delivery " << d.delivery_rate()
              << std::setprecision(2) << ", mean hops " << d.mean_hops() << ", max hops "
              << d.max_hops << std::defaultfloat << "\n";
  };
  measure("healthy ring");

  if (churn > 0.0) {
    const auto before = net.live_ids();
    std::size_t to_kill = static_cast<std::size_t>(static_cast<double>(before.size()) * churn);
    for (std::size_t i = 0; i < to_kill; ++i) {
      const auto& live = net.live_ids();
      net.crash(live[rng.next_below(live.size())]);
    }
    net.stabilize();
    std::cout << "crashed " << to_kill << " nodes, ran repair\n";
    measure("after churn");
  }
  return 0;
}

classad::Ad load_ad(const std::string& path, classad::AdKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sim::ConfigError("cannot open ad file: " + path);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw sim::ConfigError(path + ": " + e.what());
  }
  return classad::Ad::from_json(doc, kind);
}

int match_check(const std::string& job_path, const std::string& resource_path) {
  const classad::Ad job = load_ad(job_path, classad::AdKind::Job);
  const classad::Ad resource = load_ad(resource_path, classad::AdKind::Resource);

  const classad::Value jr = classad::requirements_verdict(job, resource);
  const classad::Value rj = classad::requirements_verdict(resource, job);
  auto verdict = [](const classad::Value& v) -> std::string {
    if (v.kind() == classad::Value::Kind::Boolean) return v.as_boolean() ? "true" : "false";
    return "undefined";
  };
  const bool matched = classad::symmetric_match(job, resource);
  std::cout << "job requirements on resource:      " << verdict(jr) << "\n";
  std::cout << "resource requirements on job:      " << verdict(rj) << "\n";
  std::cout << "rank of resource (job's order):    " << classad::rank_score(job, resource) << "\n";
  std::cout << "rank of job (resource's order):    " << classad::rank_score(resource, job) << "\n";
  std::cout << "symmetric match:                   " << (matched ? "yes" : "no") << "\n";
  return matched ? 0 : 2;
}

int report_show(const std::string& path_arg) {
  fs::path path(path_arg);
  if (fs::is_directory(path)) path /= "summary.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sim::ConfigError("cannot open report: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw sim::ConfigError(path.string() + ": " + e.what());
  }

  const auto& m = j.at("metrics");
  std::cout << "experiment " << j.at("experiment").get<std::string>() << " (seed "
            << j.at("seed").get<std::uint64_t>() << ")\n";
  std::cout << "  completed jobs        " << m.at("completed").get<std::uint64_t>() << "\n";
  std::cout << std::fixed << std::setprecision(1);
  std::cout << "  makespan              " << m.at("makespan_seconds").get<double>() << " s\n";
  std::cout << "  median runtime        " << m.at("median_runtime_seconds").get<double>() << " s\n";
  std::cout << "  mean runtime          " << m.at("mean_runtime_seconds").get<double>() << " s\n";
  std::cout << "  steady completion gap "
            << m.at("steady_state_intercompletion_seconds").get<double>() << " s\n";
  std::cout << "  preemptions           " << m.at("preemptions").get<std::uint64_t>() << "\n";
  std::cout << "  wasted work           " << m.at("wasted_work_units").get<double>() << "\n";
  std::cout << "  serial baseline       " << j.at("serial_baseline_seconds").get<double>()
            << " s (speedup " << std::setprecision(2) << j.at("speedup_vs_serial").get<double>()
            << "x)\n";
  if (j.contains("owners")) {
    for (const auto& [owner, oj] : j.at("owners").items()) {
      std::cout << "  owner " << owner << ": " << oj.at("completed").get<std::uint64_t>()
                << " jobs, makespan " << std::setprecision(1)
                << oj.at("makespan_seconds").get<double>() << " s\n";
    }
  }
  const auto& ov = j.at("overlay");
  std::cout << "  overlay               " << ov.at("nodes").get<std::size_t>() << " nodes, delivery "
            << std::setprecision(4) << ov.at("delivery_rate").get<double>() << ", mean hops "
            << std::setprecision(2) << ov.at("mean_hops").get<double>() << "\n";
  const auto& sec = j.at("security");
  std::cout << "  security              " << sec.at("hostile_rejected").get<std::uint64_t>() << "/"
            << sec.at("hostile_frames").get<std::uint64_t>() << " hostile frames rejected\n"
            << std::defaultfloat;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"archersim: community-grid scheduling and overlay simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, sweep;
  std::uint64_t seed = 1;

  CLI::App* sim_cmd = app.add_subcommand("sim", "workload simulations");
  sim_cmd->require_subcommand(1);
  CLI::App* run_cmd = sim_cmd->add_subcommand("run", "simulate a config file");
  run_cmd->add_option("--config", config_path, "config JSON path")->required();
  run_cmd->add_option("--seed", seed, "simulation seed (default 1)");
  run_cmd->add_option("--out", out_dir, "output directory root (default ./out)");
  run_cmd->add_option("--sweep", sweep, "seed range A..B, runs in parallel");
  CLI::App* fig2_cmd = sim_cmd->add_subcommand("fig2", "built-in 200-job reference workload");
  fig2_cmd->add_option("--seed", seed, "simulation seed (default 1)");
  fig2_cmd->add_option("--out", out_dir, "output directory root (default ./out)");
  fig2_cmd->add_option("--sweep", sweep, "seed range A..B, runs in parallel");
  CLI::App* sc1_cmd = sim_cmd->add_subcommand("scenario1", "built-in 160-job day-window workload");
  sc1_cmd->add_option("--seed", seed, "simulation seed (default 1)");
  sc1_cmd->add_option("--out", out_dir, "output directory root (default ./out)");
  sc1_cmd->add_option("--sweep", sweep, "seed range A..B, runs in parallel");

  std::size_t demo_nodes = 64, demo_pairs = 0;
  unsigned demo_bits = 16;
  std::uint64_t demo_seed = 1;
  double demo_public = 0.4, demo_cone = 0.4, demo_symmetric = 0.2, demo_churn = 0.0;
  CLI::App* overlay_cmd = app.add_subcommand("overlay", "overlay network probes");
  CLI::App* demo_cmd = overlay_cmd->add_subcommand("demo", "build a ring and measure routing");
  demo_cmd->add_option("--nodes", demo_nodes, "ring size (default 64)");
  demo_cmd->add_option("--bits", demo_bits, "ring id width in bits (default 16)");
  demo_cmd->add_option("--seed", demo_seed, "seed (default 1)");
  demo_cmd->add_option("--pairs", demo_pairs, "sampled pairs; 0 = all ordered pairs");
  demo_cmd->add_option("--public", demo_public, "fraction of public nodes");
  demo_cmd->add_option("--cone", demo_cone, "fraction of cone-NAT nodes");
  demo_cmd->add_option("--symmetric", demo_symmetric, "fraction of symmetric-NAT nodes");
  demo_cmd->add_option("--churn", demo_churn, "fraction of nodes to crash, then repair");

  std::string job_path, resource_path;
  CLI::App* match_cmd = app.add_subcommand("match", "matchmaking utilities");
  CLI::App* check_cmd = match_cmd->add_subcommand("check", "evaluate a job/resource ad pair");
  check_cmd->add_option("--job", job_path, "job ad JSON path")->required();
  check_cmd->add_option("--resource", resource_path, "resource ad JSON path")->required();

  std::string report_path;
  CLI::App* report_cmd = app.add_subcommand("report", "inspect run outputs");
  CLI::App* show_cmd = report_cmd->add_subcommand("show", "print a summary.json");
  show_cmd->add_option("path", report_path, "summary.json or run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) return run_command(config_path, seed, out_dir, sweep);
    if (fig2_cmd->parsed())
      return run_command(find_profile("fig2").string(), seed, out_dir, sweep);
    if (sc1_cmd->parsed())
      return run_command(find_profile("scenario1").string(), seed, out_dir, sweep);
    if (demo_cmd->parsed())
      return overlay_demo(demo_nodes, demo_bits, demo_seed, demo_pairs, demo_public, demo_cone,
                          demo_symmetric, demo_churn);
    if (check_cmd->parsed()) return match_check(job_path, resource_path);
    if (show_cmd->parsed()) return report_show(report_path);
    std::cerr << "archersim: error: no command selected\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "archersim: error: " << e.what() << "\n";
    return 1;
  }
}
