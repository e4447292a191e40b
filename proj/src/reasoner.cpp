#include "evoagent/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::plan_next: return "plan_next";
    case RequestKind::describe_triple: return "describe_triple";
    case RequestKind::merge_descriptions: return "merge_descriptions";
    case RequestKind::judge_repetitive: return "judge_repetitive";
    case RequestKind::synthesize_shortcut: return "synthesize_shortcut";
    case RequestKind::check_applicable: return "check_applicable";
  }
  return "?";
}

std::optional<RequestKind> parse_request_kind(std::string_view name) {
  for (auto k : kRequestKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void to_json(json& j, const ReasonerUsage& u) {
  j = json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

void from_json(const json& j, ReasonerUsage& u) {
  u.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  u.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  if (u.prompt_tokens < 0 || u.completion_tokens < 0) {
    throw Error(Errc::parse, "token counts must be non-negative");
  }
}

json ReasonerRequest::canonical() const {
  return json{{"kind", to_string(kind)}, {"task", task}, {"payload", payload}};
}

std::string ReasonerRequest::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_dump(canonical()))));
  return buf;
}

namespace {

[[noreturn]] void shape_error(const ReasonerRequest& r, const std::string& why) {
  throw Error(Errc::payload_shape, std::string(to_string(r.kind)) + " payload: " + why);
}

void need_object(const ReasonerRequest& r, const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_object()) {
    shape_error(r, std::string("missing object \"") + key + "\"");
  }
}

void need_array(const ReasonerRequest& r, const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array()) {
    shape_error(r, std::string("missing array \"") + key + "\"");
  }
}

void need_string(const ReasonerRequest& r, const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string() ||
      j.at(key).get_ref<const std::string&>().empty()) {
    shape_error(r, std::string("missing string \"") + key + "\"");
  }
}

}  // namespace

void check_payload_shape(const ReasonerRequest& r) {
  const auto& p = r.payload;
  if (!p.is_object()) shape_error(r, "payload must be an object");
  switch (r.kind) {
    case RequestKind::plan_next:
      need_object(r, p, "observation");
      need_array(r, p.at("observation"), "elements");
      need_array(r, p, "history");
      break;
    case RequestKind::describe_triple:
      need_object(r, p, "source_page");
      need_object(r, p, "element");
      need_object(r, p, "action");
      need_object(r, p, "target_page");
      need_string(r, p.at("element"), "visual_descriptor");
      need_string(r, p.at("action"), "kind");
      break;
    case RequestKind::merge_descriptions:
      need_array(r, p, "descriptions");
      if (!p.contains("page_id")) shape_error(r, "missing \"page_id\"");
      break;
    case RequestKind::judge_repetitive:
    case RequestKind::synthesize_shortcut:
      need_array(r, p, "steps");
      break;
    case RequestKind::check_applicable:
      need_object(r, p, "shortcut");
      need_array(r, p.at("shortcut"), "steps");
      need_object(r, p, "observation");
      break;
  }
}

ReasonerResponse InstrumentedBackend::complete(const ReasonerRequest& request) {
  auto response = inner_->complete(request);
  log_.push_back({request.kind, request.digest(), response.usage});
  return response;
}

std::size_t InstrumentedBackend::count(RequestKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(), [&](const auto& c) { return c.kind == kind; }));
}

ReasonerUsage InstrumentedBackend::total_usage() const {
  ReasonerUsage total;
  for (const auto& c : log_) total += c.usage;
  return total;
}

SimulatedLatencyBackend::SimulatedLatencyBackend(ReasonerBackend& inner, Clock& clock,
                                                 LatencyModel model)
    : inner_(&inner), clock_(&clock), model_(model), rng_(model.seed ^ 0x6c61746e63790000ULL) {}

ReasonerResponse SimulatedLatencyBackend::complete(const ReasonerRequest& request) {
  auto response = inner_->complete(request);
  const double nominal = static_cast<double>(model_.base_ms) +
                         static_cast<double>(model_.per_token_ms * response.usage.total());
  const double factor = 1.0 + model_.jitter * (2.0 * rng_.uniform() - 1.0);
  clock_->advance(static_cast<std::int64_t>(std::llround(nominal * factor)));
  return response;
}

// --- typed operations ----------------------------------------------------------------------

json observation_payload(const ScreenObservation& obs) {
  json elements = json::array();
  for (const auto& el : obs.elements) elements.push_back(el);
  return json{{"elements", elements}};
}

namespace {

json page_payload(const PageContext& page) {
  return json{{"id", page.id.value}, {"description", page.description}, {"elements", page.elements}};
}

json slice_payload(const std::vector<SliceStep>& steps) {
  json out = json::array();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    json step{{"order", i + 1},
              {"element", s.element.value},
              {"descriptor", s.descriptor},
              {"kind", to_string(s.kind)},
              {"element_description", s.element_description},
              {"page_description", s.page_description}};
    if (s.text) step["text"] = *s.text;
    if (s.swipe) step["swipe"] = *s.swipe;
    out.push_back(std::move(step));
  }
  return out;
}

[[noreturn]] void reply_error(RequestKind kind, const std::string& why) {
  throw Error(Errc::parse, std::string(to_string(kind)) + " reply: " + why);
}

const json& reply_field(RequestKind kind, const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    reply_error(kind, std::string("missing \"") + key + "\"");
  }
  return body.at(key);
}

template <class T>
T reply_optional(RequestKind kind, const json& body, const char* key, T fallback) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    reply_error(kind, std::string("\"") + key + "\" has the wrong type");
  }
}

std::string reply_string(RequestKind kind, const json& body, const char* key) {
  const auto& v = reply_field(kind, body, key);
  if (!v.is_string()) reply_error(kind, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

DetectedIndex resolve_target(const json& target, const ScreenObservation& obs) {
  if (target.is_number_unsigned() || target.is_number_integer()) {
    const auto idx = target.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= obs.elements.size()) {
      reply_error(RequestKind::plan_next,
                  "target index " + std::to_string(idx) + " is not on the observation");
    }
    return DetectedIndex{static_cast<std::size_t>(idx)};
  }
  if (target.is_string()) {
    const auto& d = target.get_ref<const std::string&>();
    for (const auto& el : obs.elements) {
      if (el.visual_descriptor == d) return DetectedIndex{el.index};
    }
    reply_error(RequestKind::plan_next, "target \"" + d + "\" is not on the observation");
  }
  reply_error(RequestKind::plan_next, "target must be an index or a descriptor");
}

}  // namespace

ReasonerResponse Reasoner::request(const ReasonerRequest& req) {
  check_payload_shape(req);
  auto response = backend_->complete(req);
  ++calls_[req.kind];
  usage_ += response.usage;
  return response;
}

std::size_t Reasoner::calls(RequestKind kind) const {
  auto it = calls_.find(kind);
  return it == calls_.end() ? 0 : it->second;
}

Reasoned<PlanDecision> Reasoner::plan_next(const std::string& task, const ScreenObservation& obs,
                                           const std::vector<HistoryEntry>& history) {
  json hist = json::array();
  for (const auto& h : history) {
    json entry{{"kind", to_string(h.kind)}, {"descriptor", h.descriptor}};
    if (h.text) entry["text"] = *h.text;
    hist.push_back(std::move(entry));
  }
  auto resp = request({RequestKind::plan_next, task,
                       json{{"observation", observation_payload(obs)}, {"history", hist}}});
  const auto& body = resp.body;
  const auto decision = reply_string(RequestKind::plan_next, body, "decision");

  if (decision == "finish") {
    return {PlanFinish{reply_optional<std::string>(RequestKind::plan_next, body, "summary", "")}, resp.usage};
  }
  if (decision == "fail") {
    return {PlanFail{reply_optional<std::string>(RequestKind::plan_next, body, "reason", "")}, resp.usage};
  }
  if (decision != "act") reply_error(RequestKind::plan_next, "unknown decision \"" + decision + "\"");

  const auto& action = reply_field(RequestKind::plan_next, body, "action");
  PlanAct act;
  try {
    act.invocation.kind = action_kind_from_json(action.at("kind"));
  } catch (const std::exception& ex) {
    reply_error(RequestKind::plan_next, ex.what());
  }
  if (auto it = action.find("target"); it != action.end() && !it->is_null()) {
    act.invocation.target = resolve_target(*it, obs);
  }
  if (auto it = action.find("text"); it != action.end()) {
    if (!it->is_string()) reply_error(RequestKind::plan_next, "\"text\" must be a string");
    act.invocation.text_payload = it->get<std::string>();
  }
  if (act.invocation.kind == BasicActionKind::swipe) {
    SwipeParams sp;
    const auto dir_name = action.value("direction", json("down"));
    const auto dir = dir_name.is_string() ? parse_swipe_direction(dir_name.get<std::string>())
                                          : std::nullopt;
    if (!dir) reply_error(RequestKind::plan_next, "bad swipe direction " + dir_name.dump());
    sp.direction = *dir;
    const auto mag = action.value("magnitude", json(1.0));
    if (!mag.is_number()) reply_error(RequestKind::plan_next, "\"magnitude\" must be a number");
    sp.magnitude = mag.get<double>();
    act.invocation.swipe_params = sp;
  }
  if (auto violations = validate_invocation(act.invocation); !violations.empty()) {
    reply_error(RequestKind::plan_next, violations.front());
  }
  act.completes_task = reply_optional(RequestKind::plan_next, body, "completes_task", false);
  return {std::move(act), resp.usage};
}

Reasoned<TripleDescriptions> Reasoner::describe_triple(const std::string& task,
                                                       const TripleContext& triple) {
  json action{{"kind", to_string(triple.action)}};
  if (triple.action_text) action["text"] = *triple.action_text;
  json payload{{"source_page", page_payload(triple.source)},
               {"element", json{{"id", triple.element.value},
                                {"visual_descriptor", triple.element_descriptor},
                                {"ocr_text", triple.element_ocr},
                                {"role_hint", triple.element_role}}},
               {"action", action},
               {"target_page", page_payload(triple.target)}};
  auto resp = request({RequestKind::describe_triple, task, std::move(payload)});
  TripleDescriptions out{reply_string(RequestKind::describe_triple, resp.body, "source_page"),
                         reply_string(RequestKind::describe_triple, resp.body, "element"),
                         reply_string(RequestKind::describe_triple, resp.body, "target_page")};
  if (out.source_page.empty() || out.element.empty() || out.target_page.empty()) {
    reply_error(RequestKind::describe_triple, "descriptions must be non-empty");
  }
  return {std::move(out), resp.usage};
}

Reasoned<std::string> Reasoner::merge_page_descriptions(const std::vector<std::string>& descriptions,
                                                        const std::string& task, PageId page) {
  if (descriptions.empty()) {
    throw Error(Errc::empty_list, "merge_page_descriptions needs at least one description");
  }
  auto resp = request({RequestKind::merge_descriptions, task,
                       json{{"page_id", page.value}, {"descriptions", descriptions}}});
  auto merged = reply_string(RequestKind::merge_descriptions, resp.body, "description");
  if (merged.empty()) reply_error(RequestKind::merge_descriptions, "merged text is empty");
  return {std::move(merged), resp.usage};
}

Reasoned<bool> Reasoner::judge_repetitive(const std::string& task,
                                          const std::vector<SliceStep>& steps) {
  json list = json::array();
  for (const auto& s : steps) {
    list.push_back(json{{"element", s.element.value},
                        {"descriptor", s.descriptor},
                        {"kind", to_string(s.kind)}});
  }
  auto resp = request({RequestKind::judge_repetitive, task, json{{"steps", list}}});
  const auto& v = reply_field(RequestKind::judge_repetitive, resp.body, "repetitive");
  if (!v.is_boolean()) reply_error(RequestKind::judge_repetitive, "\"repetitive\" must be a bool");
  return {v.get<bool>(), resp.usage};
}

Reasoned<ShortcutDraft> Reasoner::synthesize_shortcut(const std::string& task,
                                                      const std::vector<SliceStep>& slice) {
  if (slice.size() < 2) {
    throw Error(Errc::slice_too_short, "a shortcut needs a slice of at least two steps");
  }
  auto resp = request({RequestKind::synthesize_shortcut, task, json{{"steps", slice_payload(slice)}}});
  const auto& body = resp.body;
  ShortcutDraft draft;
  draft.name = reply_string(RequestKind::synthesize_shortcut, body, "name");
  draft.description = reply_optional<std::string>(RequestKind::synthesize_shortcut, body, "description", "");
  draft.applicability = reply_optional<std::string>(RequestKind::synthesize_shortcut, body, "applicability", "");
  if (auto it = body.find("templates"); it != body.end()) {
    draft.templates = reply_optional<std::vector<std::string>>(RequestKind::synthesize_shortcut, body, "templates", {});
    if (draft.templates.size() != slice.size()) {
      reply_error(RequestKind::synthesize_shortcut, "need one template per slice step");
    }
  } else {
    // No explicit templates: each typed text becomes its own free parameter.
    for (std::size_t i = 0; i < slice.size(); ++i) {
      draft.templates.push_back(slice[i].kind == BasicActionKind::text
                                    ? "{text_" + std::to_string(i + 1) + "}"
                                    : "");
    }
  }
  return {std::move(draft), resp.usage};
}

Reasoned<Applicability> Reasoner::check_applicable(const std::string& task,
                                                   const ShortcutContext& shortcut,
                                                   const ScreenObservation& obs) {
  const auto& hla = shortcut.action;
  json steps = json::array();
  for (std::size_t i = 0; i < hla.steps.size(); ++i) {
    steps.push_back(json{
        {"order", i + 1},
        {"element", hla.steps[i].element.value},
        {"descriptor", i < shortcut.step_descriptors.size() ? shortcut.step_descriptors[i] : ""},
        {"description", i < shortcut.step_descriptions.size() ? shortcut.step_descriptions[i] : ""},
        {"kind", to_string(hla.steps[i].kind)},
        {"template", hla.steps[i].param_template}});
  }
  json payload{{"shortcut", json{{"id", hla.id.value},
                                 {"name", hla.name},
                                 {"description", hla.description},
                                 {"applicability", hla.applicability},
                                 {"parameters", hla.parameters()},
                                 {"steps", steps}}},
               {"observation", observation_payload(obs)}};
  auto resp = request({RequestKind::check_applicable, task, std::move(payload)});
  const auto& body = resp.body;
  const auto& flag = reply_field(RequestKind::check_applicable, body, "applicable");
  if (!flag.is_boolean()) reply_error(RequestKind::check_applicable, "\"applicable\" must be a bool");

  Applicability out;
  if (!flag.get<bool>()) {
    out.reason = reply_optional<std::string>(RequestKind::check_applicable, body, "reason", "not applicable");
    return {std::move(out), resp.usage};
  }
  out.bindings = reply_optional(RequestKind::check_applicable, body, "bindings", Bindings{});
  out.completes_task = reply_optional(RequestKind::check_applicable, body, "completes_task", false);
  for (const auto& name : hla.parameters()) {
    if (!out.bindings.contains(name)) {
      return {Applicability{false, {}, false, "incomplete bindings"}, resp.usage};
    }
  }
  out.applicable = true;
  return {std::move(out), resp.usage};
}

}  // namespace evoagent
