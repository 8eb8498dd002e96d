#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/classad/parser.hpp"
#include "archer/sim/profile.hpp"

namespace archer::harness {

struct OverlayProbeSpec {
  std::size_t nodes = 64;
  unsigned bits = 16;
  double frac_public = 0.4;
  double frac_cone = 0.4;
  double frac_symmetric = 0.2;
  std::uint64_t seed = 1;
};

struct OutputSpec {
  std::string summary = "summary.json";
  std::string trace = "trace.jsonl";
  std::string cdf = "cdf.csv";
};

struct ExperimentConfig {
  std::string name;
  sim::ExperimentProfile profile;
  OverlayProbeSpec overlay;
  OutputSpec output;
  nlohmann::ordered_json echo;  // normalized source document
};

namespace detail {

inline const char* json_type_name(const nlohmann::json& v) {
  switch (v.type()) {
    case nlohmann::json::value_t::object: return "object";
    case nlohmann::json::value_t::array: return "array";
    case nlohmann::json::value_t::string: return "string";
    case nlohmann::json::value_t::boolean: return "boolean";
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned:
    case nlohmann::json::value_t::number_float: return "number";
    case nlohmann::json::value_t::null: return "null";
    default: return "value";
  }
}

// Field extraction never throws: a missing key yields the fallback, a
// mistyped one is recorded so every problem surfaces in one pass.
class Cursor {
 public:
  Cursor(const nlohmann::json& node, std::string where, std::vector<std::string>& errs)
      : node_(node), where_(std::move(where)), errs_(errs) {}

  bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

  Cursor child(const char* key) const {
    static const nlohmann::json empty = nlohmann::json::object();
    if (has(key) && node_.at(key).is_object()) return {node_.at(key), where_ + "." + key, errs_};
    if (has(key)) errs_.push_back(where_ + "." + key + ": expected object, got " + json_type_name(node_.at(key)));
    return {empty, where_ + "." + key, errs_};
  }

  const nlohmann::json* array(const char* key, bool required = false) const {
    if (!has(key)) {
      if (required) errs_.push_back(where_ + "." + key + ": missing required array");
      return nullptr;
    }
    if (!node_.at(key).is_array()) {
      errs_.push_back(where_ + "." + key + ": expected array, got " + json_type_name(node_.at(key)));
      return nullptr;
    }
    return &node_.at(key);
  }

  std::string text(const char* key, std::string fallback, bool required = false) const {
    if (!has(key)) {
      if (required) errs_.push_back(where_ + "." + key + ": missing required string");
      return fallback;
    }
    if (!node_.at(key).is_string()) {
      errs_.push_back(where_ + "." + key + ": expected string, got " + json_type_name(node_.at(key)));
      return fallback;
    }
    return node_.at(key).get<std::string>();
  }

  double number(const char* key, double fallback, bool required = false) const {
    if (!has(key)) {
      if (required) errs_.push_back(where_ + "." + key + ": missing required number");
      return fallback;
    }
    if (!node_.at(key).is_number()) {
      errs_.push_back(where_ + "." + key + ": expected number, got " + json_type_name(node_.at(key)));
      return fallback;
    }
    return node_.at(key).get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback, bool required = false) const {
    if (!has(key)) {
      if (required) errs_.push_back(where_ + "." + key + ": missing required integer");
      return fallback;
    }
    if (!node_.at(key).is_number_integer() && !node_.at(key).is_number_unsigned()) {
      errs_.push_back(where_ + "." + key + ": expected integer, got " + json_type_name(node_.at(key)));
      return fallback;
    }
    return node_.at(key).get<std::int64_t>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!node_.at(key).is_boolean()) {
      errs_.push_back(where_ + "." + key + ": expected boolean, got " + json_type_name(node_.at(key)));
      return fallback;
    }
    return node_.at(key).get<bool>();
  }

  const nlohmann::json& raw() const { return node_; }
  const std::string& where() const { return where_; }
  void complain(const std::string& msg) const { errs_.push_back(where_ + ": " + msg); }

 private:
  const nlohmann::json& node_;
  std::string where_;
  std::vector<std::string>& errs_;
};

inline void check_expression(const std::string& source, const std::string& where,
                             std::vector<std::string>& errs) {
  try {
    classad::parse_expr(source);
  } catch (const classad::SyntaxError& err) {
    errs.push_back(where + ": " + err.what());
  }
}

}  // namespace detail

// Extracts a config and accumulates every violation instead of stopping at
// the first; an empty result vector means `out` is fully valid.
inline std::vector<std::string> config_violations(const nlohmann::json& doc, ExperimentConfig& out) {
  std::vector<std::string> errs;
  if (!doc.is_object()) {
    errs.push_back("config root: expected object");
    return errs;
  }
  detail::Cursor root(doc, "config", errs);

  detail::Cursor exp = root.child("experiment");
  out.name = exp.text("name", "", true);
  if (exp.raw().is_object() && exp.has("name") && out.name.empty())
    errs.push_back("experiment.name: must not be empty");
  out.profile.name = out.name;

  const std::int64_t declared_jobs = exp.integer("n_jobs", -1);
  const std::int64_t declared_nodes = exp.integer("n_nodes", -1);

  if (exp.has("overhead") && exp.raw().at("overhead").is_number()) {
    const double mult = exp.number("overhead", 1.0);
    if (mult < 1.0) {
      errs.push_back("experiment.overhead: multiplier must be >= 1.0");
    } else {
      out.profile.overhead = sim::OverheadModel::custom(mult);
    }
  } else {
    const std::string flavor = exp.text("overhead", "none");
    try {
      out.profile.overhead = sim::OverheadModel::from(sim::overhead_from_string(flavor));
    } catch (const sim::ConfigError& e) {
      errs.push_back(std::string("experiment.overhead: ") + e.what());
    }
  }

  out.profile.submit_link_delay = exp.number("submit_link_delay_seconds", 5.0);
  if (out.profile.submit_link_delay < 0.0)
    errs.push_back("experiment.submit_link_delay_seconds: must be >= 0");

  std::set<std::string> pool_ids;
  if (const nlohmann::json* pools = root.array("pools", true)) {
    for (std::size_t i = 0; i < pools->size(); ++i) {
      detail::Cursor p(pools->at(i), "pools[" + std::to_string(i) + "]", errs);
      sim::PoolSpec spec;
      spec.pool_id = p.text("id", "", true);
      spec.negotiation_interval = p.number("negotiation_interval_seconds", 60.0);
      if (spec.negotiation_interval <= 0.0)
        p.complain("negotiation_interval_seconds must be positive");
      if (!spec.pool_id.empty() && !pool_ids.insert(spec.pool_id).second)
        p.complain("duplicate pool id '" + spec.pool_id + "'");
      if (const nlohmann::json* targets = p.array("flock_targets")) {
        for (const auto& t : *targets) {
          if (!t.is_string()) {
            p.complain("flock_targets entries must be strings");
            continue;
          }
          spec.flock_targets.push_back(t.get<std::string>());
        }
      }
      out.profile.pools.push_back(std::move(spec));
    }
  }
  if (out.profile.pools.empty()) errs.push_back("pools: at least one pool is required");
  for (std::size_t i = 0; i < out.profile.pools.size(); ++i) {
    const sim::PoolSpec& p = out.profile.pools[i];
    for (const std::string& t : p.flock_targets) {
      if (t == p.pool_id)
        errs.push_back("pools[" + std::to_string(i) + "]: flocks to itself");
      else if (!pool_ids.count(t))
        errs.push_back("pools[" + std::to_string(i) + "]: unknown flock target '" + t + "'");
    }
  }

  std::map<std::string, std::size_t> site_sizes;
  if (const nlohmann::json* sites = root.array("sites", true)) {
    for (std::size_t i = 0; i < sites->size(); ++i) {
      detail::Cursor s(sites->at(i), "sites[" + std::to_string(i) + "]", errs);
      sim::SiteSpec spec;
      spec.name = s.text("name", "", true);
      spec.pool_id = s.text("pool", "", true);
      spec.node_count = static_cast<std::size_t>(std::max<std::int64_t>(0, s.integer("nodes", 0, true)));
      spec.speed = s.number("speed", 1.0);
      spec.memory = s.integer("memory_mb", 2048);
      spec.arch = s.text("arch", "x86");
      if (spec.node_count == 0) s.complain("nodes must be positive");
      if (spec.speed <= 0.0) s.complain("speed must be positive");
      if (spec.memory <= 0) s.complain("memory_mb must be positive");
      if (!spec.pool_id.empty() && !pool_ids.count(spec.pool_id))
        s.complain("unknown pool '" + spec.pool_id + "'");
      if (!spec.name.empty() && site_sizes.count(spec.name))
        s.complain("duplicate site name '" + spec.name + "'");
      site_sizes[spec.name] = spec.node_count;
      out.profile.sites.push_back(std::move(spec));
    }
  }
  if (out.profile.sites.empty()) errs.push_back("sites: at least one site is required");

  if (const nlohmann::json* groups = exp.array("job_groups", true)) {
    for (std::size_t i = 0; i < groups->size(); ++i) {
      const std::string where = "experiment.job_groups[" + std::to_string(i) + "]";
      detail::Cursor g(groups->at(i), where, errs);
      sim::JobGroupSpec spec;
      spec.owner = g.text("owner", "", true);
      spec.pool_id = g.text("pool", "", true);
      spec.count = static_cast<std::size_t>(std::max<std::int64_t>(0, g.integer("count", 0, true)));
      spec.work = g.number("work_units", 0.0, true);
      spec.submit_start = g.number("submit_start_seconds", 0.0);
      spec.submit_gap = g.number("submit_gap_seconds", -1.0);
      spec.work_jitter = g.number("work_jitter", 0.0);
      spec.requirements = g.text("requirements", "true");
      spec.rank = g.text("rank", "");
      if (spec.count == 0) g.complain("count must be positive");
      if (spec.work <= 0.0) g.complain("work_units must be positive");
      if (spec.work_jitter < 0.0 || spec.work_jitter >= 1.0)
        g.complain("work_jitter must be in [0, 1)");
      if (!spec.pool_id.empty() && !pool_ids.count(spec.pool_id))
        g.complain("unknown pool '" + spec.pool_id + "'");
      detail::check_expression(spec.requirements, where + ".requirements", errs);
      if (!spec.rank.empty()) detail::check_expression(spec.rank, where + ".rank", errs);
      if (g.has("attributes")) {
        const nlohmann::json& attrs = g.raw().at("attributes");
        if (!attrs.is_object()) {
          g.complain("attributes must be an object");
        } else {
          for (const auto& [name, value] : attrs.items()) {
            if (!value.is_string()) {
              errs.push_back(where + ".attributes." + name + ": expected expression string");
              continue;
            }
            spec.attributes[name] = value.get<std::string>();
            detail::check_expression(spec.attributes[name], where + ".attributes." + name, errs);
          }
        }
      }
      out.profile.job_groups.push_back(std::move(spec));
    }
  }
  if (out.profile.job_groups.empty())
    errs.push_back("experiment.job_groups: at least one job group is required");

  if (const nlohmann::json* churn = exp.array("churn")) {
    for (std::size_t i = 0; i < churn->size(); ++i) {
      detail::Cursor c(churn->at(i), "experiment.churn[" + std::to_string(i) + "]", errs);
      sim::NodeChurnSpec spec;
      spec.time = c.number("time_seconds", 0.0, true);
      spec.site = c.text("site", "", true);
      spec.index = static_cast<std::size_t>(std::max<std::int64_t>(0, c.integer("index", 0)));
      spec.join = c.boolean("join", true);
      if (spec.time < 0.0) c.complain("time_seconds must be >= 0");
      auto it = site_sizes.find(spec.site);
      if (it == site_sizes.end())
        c.complain("unknown site '" + spec.site + "'");
      else if (spec.index >= it->second)
        c.complain("index out of range for site '" + spec.site + "'");
      out.profile.churn.push_back(std::move(spec));
    }
  }

  out.profile.n_jobs = static_cast<std::size_t>(std::max<std::int64_t>(0, declared_jobs));
  out.profile.n_nodes = static_cast<std::size_t>(std::max<std::int64_t>(0, declared_nodes));
  if (declared_jobs >= 0 &&
      static_cast<std::size_t>(declared_jobs) != out.profile.group_job_total())
    errs.push_back("experiment.n_jobs: declared " + std::to_string(declared_jobs) +
                   " but job groups sum to " + std::to_string(out.profile.group_job_total()));
  if (declared_nodes >= 0 &&
      static_cast<std::size_t>(declared_nodes) != out.profile.site_node_total())
    errs.push_back("experiment.n_nodes: declared " + std::to_string(declared_nodes) +
                   " but sites sum to " + std::to_string(out.profile.site_node_total()));

  detail::Cursor ov = root.child("overlay");
  out.overlay.nodes = static_cast<std::size_t>(std::max<std::int64_t>(0, ov.integer("nodes", 64)));
  out.overlay.bits = static_cast<unsigned>(std::max<std::int64_t>(0, ov.integer("bits", 16)));
  out.overlay.seed = static_cast<std::uint64_t>(ov.integer("seed", 1));
  detail::Cursor mix = ov.child("nat_mix");
  out.overlay.frac_public = mix.number("public", 0.4);
  out.overlay.frac_cone = mix.number("cone", 0.4);
  out.overlay.frac_symmetric = mix.number("symmetric", 0.2);
  if (out.overlay.nodes < 2) errs.push_back("overlay.nodes: need at least 2 nodes");
  if (out.overlay.bits < 4 || out.overlay.bits > 160)
    errs.push_back("overlay.bits: must be in [4, 160]");
  const double mix_sum =
      out.overlay.frac_public + out.overlay.frac_cone + out.overlay.frac_symmetric;
  if (out.overlay.frac_public < 0.0 || out.overlay.frac_cone < 0.0 ||
      out.overlay.frac_symmetric < 0.0 || std::abs(mix_sum - 1.0) > 1e-9)
    errs.push_back("overlay.nat_mix: fractions must be non-negative and sum to 1");

  detail::Cursor outp = root.child("output");
  out.output.summary = outp.text("summary", "summary.json");
  out.output.trace = outp.text("trace", "trace.jsonl");
  out.output.cdf = outp.text("cdf", "cdf.csv");
  if (out.output.summary.empty() || out.output.trace.empty() || out.output.cdf.empty())
    errs.push_back("output: file names must not be empty");

  out.echo = nlohmann::ordered_json::parse(doc.dump());
  return errs;
}

inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  ExperimentConfig cfg;
  std::vector<std::string> errs = config_violations(doc, cfg);
  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid config (" << errs.size() << " violation" << (errs.size() == 1 ? "" : "s") << "):";
    for (const std::string& e : errs) os << "\n  - " << e;
    throw sim::ConfigError(os.str());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sim::ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t upto = e.byte > 0 ? std::min(text.size(), e.byte - 1) : 0;
    for (std::size_t i = 0; i < upto; ++i)
      if (text[i] == '\n') ++line;
    throw sim::ConfigError(path.string() + ":" + std::to_string(line) +
                           ": config parse error: " + e.what());
  }
  try {
    return parse_config(doc);
  } catch (const sim::ConfigError& e) {
    throw sim::ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace archer::harness
