#include "evoagent/serialization.hpp"

#include "evoagent/error.hpp"

namespace evoagent {

using nlohmann::json;

void to_json(json& j, const BBox& b) { j = json::array({b.x0, b.y0, b.x1, b.y1}); }

void from_json(const json& j, BBox& b) {
  if (!j.is_array() || j.size() != 4) throw Error(Errc::parse, "bbox must be [x0,y0,x1,y1]");
  b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(json& j, const DetectedElement& e) {
  j = json{{"index", e.index},
           {"bbox", e.bbox},
           {"role_hint", e.role_hint},
           {"ocr_text", e.ocr_text},
           {"visual_descriptor", e.visual_descriptor}};
}

void from_json(const json& j, DetectedElement& e) {
  e.index = j.at("index").get<std::size_t>();
  e.bbox = j.at("bbox").get<BBox>();
  e.role_hint = j.at("role_hint").get<std::string>();
  e.ocr_text = j.at("ocr_text").get<std::string>();
  e.visual_descriptor = j.at("visual_descriptor").get<std::string>();
}

void to_json(json& j, const ScreenObservation& o) {
  j = json{{"elements", o.elements}, {"raster_ref", o.raster_ref}, {"captured_at", o.captured_at}};
}

void from_json(const json& j, ScreenObservation& o) {
  o.elements = j.at("elements").get<std::vector<DetectedElement>>();
  o.raster_ref = j.value("raster_ref", "");
  o.captured_at = j.value("captured_at", std::int64_t{0});
}

void to_json(json& j, const SwipeParams& s) {
  j = json{{"direction", to_string(s.direction)}, {"magnitude", s.magnitude}};
}

void from_json(const json& j, SwipeParams& s) {
  auto dir = parse_swipe_direction(j.at("direction").get<std::string>());
  if (!dir) throw Error(Errc::parse, "unknown swipe direction " + j.at("direction").dump());
  s.direction = *dir;
  s.magnitude = j.value("magnitude", 1.0);
}

BasicActionKind action_kind_from_json(const json& j) {
  auto kind = parse_action_kind(j.get<std::string>());
  if (!kind) throw Error(Errc::parse, "unknown action kind " + j.dump());
  return *kind;
}

void to_json(json& j, const ActionInvocation& inv) {
  j = json{{"kind", to_string(inv.kind)}};
  if (inv.target) {
    if (const auto* idx = std::get_if<DetectedIndex>(&*inv.target)) {
      j["target"] = json{{"index", idx->value}};
    } else {
      j["target"] = json{{"element", std::get<ElementId>(*inv.target).value}};
    }
  }
  if (inv.text_payload) j["text"] = *inv.text_payload;
  if (inv.swipe_params) j["swipe"] = *inv.swipe_params;
}

void from_json(const json& j, ActionInvocation& inv) {
  inv = {};
  inv.kind = action_kind_from_json(j.at("kind"));
  if (auto it = j.find("target"); it != j.end()) {
    if (it->contains("index")) {
      inv.target = DetectedIndex{it->at("index").get<std::size_t>()};
    } else if (it->contains("element")) {
      inv.target = ElementId{it->at("element").get<std::uint64_t>()};
    } else {
      throw Error(Errc::parse, "target needs index or element");
    }
  }
  if (auto it = j.find("text"); it != j.end()) inv.text_payload = it->get<std::string>();
  if (auto it = j.find("swipe"); it != j.end()) inv.swipe_params = it->get<SwipeParams>();
}

json step_action_params(const HighLevelStep& step) {
  json params = json::object();
  if (!step.param_template.empty() || step.kind == BasicActionKind::text) {
    params["template"] = step.param_template;
  }
  if (step.swipe_params) {
    params["direction"] = to_string(step.swipe_params->direction);
    params["magnitude"] = step.swipe_params->magnitude;
  }
  return params;
}

void apply_action_params(const json& params, HighLevelStep& step) {
  step.param_template = params.value("template", "");
  if (params.contains("direction")) {
    SwipeParams sp;
    from_json(params, sp);
    step.swipe_params = sp;
  }
}

std::string canonical_dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

}  // namespace evoagent
