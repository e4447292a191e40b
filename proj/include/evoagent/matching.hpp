#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "evoagent/ids.hpp"
#include "evoagent/memory_graph.hpp"
#include "evoagent/observation.hpp"

namespace evoagent {

inline constexpr double kDefaultMatchThreshold = 0.9;

struct MatchResult {
  std::size_t detected_index = 0;
  ElementId element;
  double similarity = 0.0;
};

/// For each detected element, the single nearest stored element node with similarity >=
/// threshold, ordered by detected index. Two look-alike elements may map to one node.
/// Throws Errc::invalid_argument unless threshold lies in (0, 1].
std::vector<MatchResult> match_elements(const ScreenObservation& obs, const GraphStore& store,
                                        double threshold = kDefaultMatchThreshold);

/// Where a stored element node appears on screen: the detected element most similar to it,
/// if that similarity clears the threshold.
std::optional<std::size_t> locate_element(const ScreenObservation& obs, const GraphStore& store,
                                          ElementId element,
                                          double threshold = kDefaultMatchThreshold);

}  // namespace evoagent
