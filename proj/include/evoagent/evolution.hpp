#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evoagent/action_space.hpp"
#include "evoagent/ids.hpp"
#include "evoagent/memory_graph.hpp"
#include "evoagent/reasoner.hpp"
#include "evoagent/trajectory.hpp"

namespace evoagent {

struct PatternStep {
  ElementId element;
  BasicActionKind kind = BasicActionKind::tap;

  auto operator<=>(const PatternStep&) const = default;
};

struct Occurrence {
  std::string trajectory_id;
  std::size_t start = 0;  // step index in that trajectory

  bool operator==(const Occurrence&) const = default;
};

struct PatternCandidate {
  std::vector<PatternStep> steps;
  std::size_t support = 0;
  std::vector<Occurrence> occurrences;  // the greedy non-overlapping ones

  bool operator==(const PatternCandidate&) const = default;
};

/// Maximal contiguous (element, kind) patterns with at least min_len steps and min_support
/// non-overlapping occurrences, sorted by (support desc, length desc, first occurrence asc).
/// Steps without an acted element break contiguity.
std::vector<PatternCandidate> mine_patterns(const std::vector<Trajectory>& trajectories,
                                            std::size_t min_len = 2, std::size_t min_support = 1);

struct EvolutionConfig {
  std::size_t min_len = 2;
  std::optional<std::size_t> min_support;  // unset: 2 when mining cross-trajectory, else 1
  std::size_t max_new_shortcuts = 1;
  bool cross_trajectory = false;
  bool gate = true;  // ask judge_repetitive first

  std::size_t effective_min_support() const {
    return min_support.value_or(cross_trajectory ? 2 : 1);
  }
};

struct SkippedCandidate {
  std::vector<PatternStep> steps;
  std::string reason;
};

struct EvolutionReport {
  std::string trajectory_id;
  std::string outcome;  // "evolved", "gated", or "skipped: <why>"
  std::vector<PatternCandidate> candidates;
  std::vector<ShortcutId> created;
  std::vector<SkippedCandidate> skipped;
  ActionSpace space;
  ReasonerUsage usage;
};

nlohmann::json to_json_value(const EvolutionReport& report);

/// Gate, mine, then synthesize and store up to max_new_shortcuts of the best candidates.
/// `history` supplies the other stored trajectories for cross-trajectory mining; only
/// successful ones with the same task text are used. A failing candidate is skipped with a
/// reason; reasoner errors in the gate propagate.
EvolutionReport evolve(const std::string& task, const Trajectory& trajectory, Reasoner& reasoner,
                       GraphStore& store, const ActionSpace& space, const EvolutionConfig& config,
                       const std::vector<Trajectory>& history = {});

}  // namespace evoagent
