#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "archer/gridpool/pool.hpp"
#include "archer/sim/job.hpp"

namespace archer::sim {

struct EmptyMetricsError : std::runtime_error {
  EmptyMetricsError() : std::runtime_error("no completed jobs to measure") {}
};

struct Metrics {
  std::size_t completed = 0;
  std::vector<double> runtimes;  // sorted final-segment execution times
  std::vector<std::pair<double, std::size_t>> cdf;  // (completion time, count)
  double makespan = 0.0;
  double median_runtime = 0.0;
  double mean_runtime = 0.0;
  double steady_state_intercompletion = 0.0;
  std::uint64_t preemption_count = 0;
  double wasted_work = 0.0;
  double completed_work = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["completed"] = completed;
    j["makespan_seconds"] = makespan;
    j["median_runtime_seconds"] = median_runtime;
    j["mean_runtime_seconds"] = mean_runtime;
    j["steady_state_intercompletion_seconds"] = steady_state_intercompletion;
    j["preemptions"] = preemption_count;
    j["wasted_work_units"] = wasted_work;
    j["completed_work_units"] = completed_work;
    return j;
  }

  std::string cdf_csv() const {
    std::string out = "time_seconds,jobs_completed\n";
    for (const auto& [t, n] : cdf) {
      nlohmann::json tv = t;  // shortest round-trip float formatting
      out += tv.dump();
      out += ',';
      out += std::to_string(n);
      out += '\n';
    }
    return out;
  }
};

// Aggregates over completed jobs, optionally one owner's only. Runtime is
// the final successful segment; earlier preempted segments count as waste.
inline Metrics collect_metrics(const gridpool::GridState& state,
                               std::optional<std::string> owner = std::nullopt) {
  std::vector<double> completions;
  double first_submit = 0.0;
  bool any = false;
  Metrics m;
  for (const auto& [id, job] : state.jobs) {
    if (owner && job.owner != *owner) continue;
    m.preemption_count += job.preemption_count;
    m.wasted_work += job.wasted_work;
    if (job.state != JobState::Completed) continue;
    if (!any || job.submit_time < first_submit) first_submit = job.submit_time;
    any = true;
    m.runtimes.push_back(job.completion_time - job.last_start_time);
    completions.push_back(job.completion_time);
    m.completed_work += job.work;
  }
  if (!any) throw EmptyMetricsError();

  m.completed = completions.size();
  std::sort(m.runtimes.begin(), m.runtimes.end());
  std::sort(completions.begin(), completions.end());

  std::size_t n = m.runtimes.size();
  m.median_runtime = n % 2 == 1 ? m.runtimes[n / 2]
                                : (m.runtimes[n / 2 - 1] + m.runtimes[n / 2]) / 2.0;
  double sum = 0.0;
  for (double r : m.runtimes) sum += r;
  m.mean_runtime = sum / static_cast<double>(n);

  m.cdf.reserve(n);
  for (std::size_t i = 0; i < n; ++i) m.cdf.emplace_back(completions[i], i + 1);
  m.makespan = completions.back() - first_submit;

  // Mean gap across the middle 50% of completions; telescopes to the
  // quartile spread over the gap count.
  std::size_t lo = n / 4;
  std::size_t hi = (3 * n) / 4;
  if (hi > lo) {
    m.steady_state_intercompletion =
        (completions[hi] - completions[lo]) / static_cast<double>(hi - lo);
  }
  return m;
}

}  // namespace archer::sim
