#pragma once

#include "json.hpp"

#include "evoagent/action_space.hpp"
#include "evoagent/observation.hpp"

namespace evoagent {

void to_json(nlohmann::json& j, const BBox& b);
void from_json(const nlohmann::json& j, BBox& b);
void to_json(nlohmann::json& j, const DetectedElement& e);
void from_json(const nlohmann::json& j, DetectedElement& e);
void to_json(nlohmann::json& j, const ScreenObservation& o);
void from_json(const nlohmann::json& j, ScreenObservation& o);
void to_json(nlohmann::json& j, const SwipeParams& s);
void from_json(const nlohmann::json& j, SwipeParams& s);
void to_json(nlohmann::json& j, const ActionInvocation& inv);
void from_json(const nlohmann::json& j, ActionInvocation& inv);

BasicActionKind action_kind_from_json(const nlohmann::json& j);

/// COMPOSED_OF action_params for one shortcut step, and back.
nlohmann::json step_action_params(const HighLevelStep& step);
void apply_action_params(const nlohmann::json& params, HighLevelStep& step);

/// Canonical single-line dump (sorted keys, no whitespace).
std::string canonical_dump(const nlohmann::json& j);

}  // namespace evoagent
