#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "evoagent/action_space.hpp"
#include "evoagent/ids.hpp"
#include "evoagent/memory_graph.hpp"
#include "evoagent/reasoner.hpp"

namespace evoagent {

struct BasicOrigin {
  bool operator==(const BasicOrigin&) const = default;
};
struct ShortcutOrigin {
  ShortcutId shortcut;
  int order = 1;
  bool operator==(const ShortcutOrigin&) const = default;
};
using StepOrigin = std::variant<BasicOrigin, ShortcutOrigin>;

struct Step {
  PageId pre_page;
  ActionInvocation invocation;  // as sent to the device (detected-index targets)
  std::optional<ElementId> acted_element;
  PageId post_page;
  std::int64_t wall_time_ms = 0;
  ReasonerUsage usage;
  StepOrigin origin = BasicOrigin{};

  bool from_shortcut() const noexcept { return std::holds_alternative<ShortcutOrigin>(origin); }
  bool operator==(const Step&) const = default;
};

enum class TrajectoryStatus { success, fail, aborted };

std::string_view to_string(TrajectoryStatus status);
std::optional<TrajectoryStatus> parse_trajectory_status(std::string_view name);

struct Trajectory {
  std::string id;
  std::string task;
  std::vector<Step> steps;
  TrajectoryStatus status = TrajectoryStatus::fail;
  std::int64_t started_at = 0;

  bool operator==(const Trajectory&) const = default;
};

struct Triple {
  PageId source;
  ElementId element;
  BasicActionKind action = BasicActionKind::tap;
  PageId target;
  std::size_t step_index = 0;

  bool operator==(const Triple&) const = default;
};

/// Throws Errc::broken_chain naming the first step whose pre page differs from the previous
/// step's post page.
void check_chain(const Trajectory& traj);

/// One triple per step with an acted element, in step order.
std::vector<Triple> decompose(const Trajectory& traj);

struct NodeAnnotation {
  NodeId node;
  std::string before;
  std::string after;
  std::size_t inputs = 0;             // descriptions fed to the merge (pages) or writes (elements)
  bool included_existing = false;     // prior page text joined the merge
  bool operator==(const NodeAnnotation&) const = default;
};

struct AnnotationReport {
  std::string trajectory_id;
  std::size_t describe_calls = 0;
  std::size_t merge_calls = 0;
  std::vector<NodeAnnotation> pages;
  std::vector<NodeAnnotation> elements;
  ReasonerUsage usage;
};

nlohmann::json to_json_value(const AnnotationReport& report);

/// describe_triple once per triple, then one merge per distinct page over every description
/// generated for it (plus its existing text, if any). Element text is last-wins.
AnnotationReport annotate(const Trajectory& traj, Reasoner& reasoner, GraphStore& store);

/// Header record then one record per step.
std::string dump_trajectory(const Trajectory& traj);
/// Throws Errc::malformed_record with the line number.
Trajectory parse_trajectory(std::string_view text);

std::filesystem::path trajectory_path(const std::filesystem::path& dir, const std::string& id);
void persist(const Trajectory& traj, const std::filesystem::path& dir);
/// Throws Errc::unknown_id or Errc::malformed_record.
Trajectory load_trajectory(const std::filesystem::path& dir, const std::string& id);
/// Every trajectory in the directory, sorted by id.
std::vector<Trajectory> load_all_trajectories(const std::filesystem::path& dir);

}  // namespace evoagent
