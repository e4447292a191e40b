#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evoagent/evolution.hpp"
#include "evoagent/executor.hpp"
#include "evoagent/memory_graph.hpp"
#include "evoagent/metrics.hpp"
#include "evoagent/reasoner.hpp"
#include "evoagent/sim_env.hpp"
#include "evoagent/trajectory.hpp"

namespace evoagent {

struct SuiteTask {
  std::string task;
  TrajectoryStatus expected_status = TrajectoryStatus::success;
  std::optional<std::size_t> ground_truth_steps;
};

struct BenchmarkSuite {
  std::string name;
  std::filesystem::path app;       // resolved against the suite file's directory
  std::filesystem::path fixtures;  // optional; same resolution
  std::size_t repeats = 5;
  std::vector<SuiteTask> tasks;
};

/// Throws ValidationError listing every problem (repeats 0, no tasks, empty task text).
BenchmarkSuite parse_suite(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
BenchmarkSuite load_suite(const std::filesystem::path& file);

enum class SpaceVariant { basic, evolved };

std::string_view to_string(SpaceVariant v);
std::optional<SpaceVariant> parse_space_variant(std::string_view name);

struct SuiteConfig {
  SpaceVariant space = SpaceVariant::basic;
  std::optional<std::size_t> repeats;  // overrides the suite
  std::uint64_t seed = 0;
  bool auto_evolve = true;  // evolved variant: learn shortcuts from one basic run per task first
  EvolutionConfig evolution;
  LatencyModel latency;
  DeviceLatency device_latency;
  std::vector<Fault> faults;
  ExecutorConfig executor;
};

struct TaskMetrics {
  std::string task;
  std::optional<std::size_t> ground_truth_steps;
  std::size_t runs = 0;
  std::size_t successes = 0;
  std::size_t as_expected = 0;
  double success_rate = 0.0;
  // Averages over successful runs.
  double avg_steps = 0.0;
  double avg_task_time_ms = 0.0;
  double avg_step_time_ms = 0.0;
  double avg_tokens = 0.0;
  double avg_shortcut_invocations = 0.0;
  std::map<RequestKind, double> avg_calls;
  std::size_t fallback_events = 0;
  ReasonerUsage total_usage;  // every run
};

struct MetricsSummary {
  std::string suite;
  std::string space;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::vector<TaskMetrics> tasks;
  double success_rate = 0.0;
  double avg_steps = 0.0;
  double avg_task_time_ms = 0.0;
  double avg_step_time_ms = 0.0;
  double avg_tokens = 0.0;
  ReasonerUsage total_usage;        // evaluation runs
  ReasonerUsage preparation_usage;  // basic runs, annotation and evolution before evaluation
  std::map<RequestKind, std::size_t> calls;  // evaluation runs
};

nlohmann::json to_json_value(const MetricsSummary& s);
MetricsSummary summary_from_json(const nlohmann::json& j);

/// Averages over successful runs, success rate over all of them.
MetricsSummary summarize(const BenchmarkSuite& suite, const std::vector<TaskReport>& reports,
                         std::size_t repeats);

struct SuiteRun {
  MetricsSummary summary;
  std::vector<TaskReport> reports;      // task-major, then repeat
  std::vector<Trajectory> trajectories;  // preparation runs first, then evaluation runs
  std::vector<AnnotationReport> annotations;
  std::vector<EvolutionReport> evolutions;
  GraphStore store;
};

/// Runs every task `repeats` times on a fresh simulator against one shared memory graph, all
/// on a simulated clock. With the evolved variant and auto_evolve, each task first gets one
/// basic run, annotation and evolution. `initial` seeds the memory (and, without auto_evolve,
/// the evolved space).
SuiteRun run_suite(const BenchmarkSuite& suite, const AppModel& app, ReasonerBackend& backend,
                   const SuiteConfig& config, const GraphStore* initial = nullptr);

/// summary.json, reports/, trajectories/, annotations/, evolution/ and store.graph.jsonl.
void write_suite_outputs(const SuiteRun& run, const std::filesystem::path& out_dir);

std::string summary_table(const MetricsSummary& s);

/// Throws Errc::suite_mismatch unless both summaries cover the same suite and tasks.
nlohmann::json compare_runs(const MetricsSummary& a, const MetricsSummary& b);
std::string comparison_table(const nlohmann::json& comparison);

/// "short" (<= 5), "medium" (6-10), "long" (> 10), or "unclassed".
std::string length_class(std::optional<std::size_t> ground_truth_steps);

}  // namespace evoagent
