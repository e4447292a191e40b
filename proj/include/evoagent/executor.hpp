#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evoagent/action_space.hpp"
#include "evoagent/device.hpp"
#include "evoagent/ids.hpp"
#include "evoagent/matching.hpp"
#include "evoagent/memory_graph.hpp"
#include "evoagent/reasoner.hpp"
#include "evoagent/trajectory.hpp"

namespace evoagent {

struct ExecutorConfig {
  std::size_t max_steps = 25;
  std::size_t max_action_retries = 1;
  double match_threshold = kDefaultMatchThreshold;
  double page_threshold = kDefaultPageThreshold;
  std::size_t history_window = 5;
  std::string trajectory_id = "trajectory";
};

struct ExecutionTemplate {
  ShortcutId shortcut;
  std::vector<HighLevelStep> steps;
  std::vector<ActionInvocation> invocations;  // element-node targets
  std::vector<std::optional<Fingerprint>> expected_targets;
};

/// Instantiates the shortcut and attaches each step's expected page: the fingerprint of the
/// element's LEADS_TO target when there is exactly one.
ExecutionTemplate make_template(const HighLevelAction& hla, const Bindings& bindings,
                                const GraphStore& store);

struct TemplateStep {
  ActionInvocation performed;  // detected-index target
  ElementId element;
  PageId pre_page;
  PageId post_page;
  bool verified = false;  // landed on the expected page (or had no expectation)
  std::int64_t finished_at = 0;
};

struct TemplateAbort {
  std::size_t step_index = 0;  // steps completed before the abort
  std::string reason;
};

struct TemplateResult {
  std::vector<TemplateStep> steps;
  std::optional<TemplateAbort> abort;
  ScreenObservation final_observation;
  PageId final_page;
};

/// Runs the template in order; after each step re-observes, resolves the next step's element
/// and checks the expected page. No rollback: an abort leaves the device where it is.
TemplateResult execute_template(const ExecutionTemplate& tmpl, Device& device, GraphStore& store,
                                const ScreenObservation& obs, PageId page,
                                const ExecutorConfig& config = {});

struct ShortcutCandidate {
  ShortcutId shortcut;
  int order = 1;            // COMPOSED_OF order of the matched element
  std::size_t length = 0;   // steps in the shortcut

  bool operator==(const ShortcutCandidate&) const = default;
};

/// (order asc, length desc, id desc).
std::vector<ShortcutCandidate> prioritize(std::vector<ShortcutCandidate> candidates);

struct FallbackEvent {
  std::size_t step_index = 0;
  std::string reason;

  bool operator==(const FallbackEvent&) const = default;
};

struct TaskReport {
  std::string task;
  TrajectoryStatus status = TrajectoryStatus::fail;
  std::size_t steps_executed = 0;
  std::map<RequestKind, std::size_t> reasoner_calls_by_kind;
  ReasonerUsage usage_total;
  ReasonerUsage unattributed_usage;  // spent when no step was ever recorded
  std::int64_t wall_time_ms = 0;
  std::vector<std::int64_t> step_times_ms;
  std::size_t shortcut_invocations = 0;
  std::vector<FallbackEvent> fallback_events;
  std::string detail;

  std::size_t calls(RequestKind kind) const;
};

nlohmann::json to_json_value(const TaskReport& report);
TaskReport task_report_from_json(const nlohmann::json& j);

struct TaskRun {
  TaskReport report;
  Trajectory trajectory;
};

/// Shortcut-first loop with fallback to basic plan_next steps. The device must be at the
/// app's start state. Throws Errc::invalid_argument when max_steps is 0.
TaskRun run_task(const std::string& task, Device& device, Reasoner& reasoner, GraphStore& store,
                 const ActionSpace& space, const ExecutorConfig& config = {});

}  // namespace evoagent
