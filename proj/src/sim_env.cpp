#include "evoagent/sim_env.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

const AppElement* AppModel::find_element(const std::string& page, const std::string& local_id) const {
  auto it = pages.find(page);
  if (it == pages.end()) return nullptr;
  for (const auto& e : it->second.elements) {
    if (e.local_id == local_id) return &e;
  }
  return nullptr;
}

std::vector<std::string> validate_app(const AppModel& model) {
  std::vector<std::string> problems;
  if (model.pages.empty() || model.initial_page.empty()) {
    problems.push_back("no initial page");
  } else if (!model.pages.contains(model.initial_page)) {
    problems.push_back("initial page \"" + model.initial_page + "\" does not exist");
  }
  if (model.viewport == 0) problems.push_back("viewport must be at least 1");

  for (const auto& [name, page] : model.pages) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < page.elements.size(); ++i) {
      const auto& e = page.elements[i];
      const auto where = "page \"" + name + "\" element " + std::to_string(i);
      if (e.local_id.empty()) problems.push_back(where + ": empty local_id");
      if (!seen.insert(e.local_id).second) {
        problems.push_back(where + ": duplicate local_id \"" + e.local_id + "\"");
      }
      if (e.visual_descriptor.empty()) problems.push_back(where + ": empty visual_descriptor");
      if (!e.bbox.valid()) problems.push_back(where + ": bbox outside [0,1] or inverted");
    }
  }

  for (const auto& [page, element] : model.text_fields) {
    if (!model.find_element(page, element)) {
      problems.push_back("text field " + page + "/" + element + " does not exist");
    }
  }

  std::set<std::tuple<std::string, std::string, BasicActionKind, bool>> keys;
  for (std::size_t i = 0; i < model.transitions.size(); ++i) {
    const auto& t = model.transitions[i];
    const auto where = "transition " + std::to_string(i) + " (" + t.page + "/" + t.element + ")";
    if (!model.pages.contains(t.page)) {
      problems.push_back(where + ": page \"" + t.page + "\" does not exist");
    } else if (!model.find_element(t.page, t.element)) {
      problems.push_back(where + ": element \"" + t.element + "\" does not exist");
    }
    if (!model.pages.contains(t.target_page)) {
      problems.push_back(where + ": target page \"" + t.target_page + "\" does not exist");
    }
    if (t.kind != BasicActionKind::tap && t.kind != BasicActionKind::long_press) {
      problems.push_back(where + ": kind must be tap or long_press");
    }
    if (t.guard_field_nonempty && !model.text_fields.contains({t.page, *t.guard_field_nonempty})) {
      problems.push_back(where + ": guard field \"" + *t.guard_field_nonempty +
                         "\" is not a text field on the page");
    }
    if (!keys.insert({t.page, t.element, t.kind, t.guard_field_nonempty.has_value()}).second) {
      problems.push_back(where + ": duplicate transition for " + std::string(to_string(t.kind)) +
                         (t.guard_field_nonempty ? " (guarded)" : ""));
    }
  }
  return problems;
}

AppModel parse_app(const json& doc) {
  AppModel m;
  try {
    m.app_name = doc.at("app_name").get<std::string>();
    m.initial_page = doc.value("initial_page", "");
    m.viewport = doc.value("viewport", std::size_t{10});
    for (const auto& [name, page] : doc.at("pages").items()) {
      AppPage p;
      for (const auto& e : page.at("elements")) {
        p.elements.push_back({e.at("local_id").get<std::string>(), e.value("role_hint", ""),
                              e.value("ocr_text", ""), e.at("visual_descriptor").get<std::string>(),
                              e.at("bbox").get<BBox>()});
      }
      m.pages.emplace(name, std::move(p));
    }
    for (const auto& t : doc.value("transitions", json::array())) {
      Transition tr;
      tr.page = t.at("page").get<std::string>();
      tr.element = t.at("element").get<std::string>();
      tr.kind = action_kind_from_json(t.value("kind", json("tap")));
      if (auto g = t.find("guard"); g != t.end() && !g->is_null()) {
        tr.guard_field_nonempty = g->at("field_nonempty").get<std::string>();
      }
      tr.target_page = t.at("target_page").get<std::string>();
      m.transitions.push_back(std::move(tr));
    }
    for (const auto& f : doc.value("text_fields", json::array())) {
      m.text_fields.emplace(f.at("page").get<std::string>(), f.at("element").get<std::string>());
    }
  } catch (const json::exception& ex) {
    throw ValidationError({std::string("malformed app model: ") + ex.what()});
  } catch (const Error& ex) {
    if (dynamic_cast<const ValidationError*>(&ex)) throw;
    throw ValidationError({std::string("malformed app model: ") + ex.what()});
  }
  if (auto problems = validate_app(m); !problems.empty()) throw ValidationError(std::move(problems));
  return m;
}

namespace {

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_located(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < ex.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(Errc::parse, origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                                 ex.what());
  }
}

}  // namespace

AppModel load_app(const std::filesystem::path& file) {
  return parse_app(parse_located(read_file(file), file.string()));
}

std::string_view to_string(FaultEffect effect) {
  switch (effect) {
    case FaultEffect::remove_element: return "remove_element";
    case FaultEffect::relocate_element: return "relocate_element";
    case FaultEffect::deadend_transition: return "deadend_transition";
  }
  return "remove_element";
}

std::vector<Fault> parse_faults(const json& doc) {
  const json& list = doc.is_object() ? doc.at("faults") : doc;
  if (!list.is_array()) throw Error(Errc::parse, "fault plan must be an array");
  std::vector<Fault> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    try {
      const auto& f = list[i];
      Fault fault;
      fault.trigger_step = f.at("trigger_step").get<std::size_t>();
      const auto effect = f.at("effect").get<std::string>();
      bool known = false;
      for (auto e : {FaultEffect::remove_element, FaultEffect::relocate_element,
                     FaultEffect::deadend_transition}) {
        if (to_string(e) == effect) {
          fault.effect = e;
          known = true;
        }
      }
      if (!known) throw Error(Errc::parse, "unknown effect \"" + effect + "\"");
      fault.page = f.at("page").get<std::string>();
      fault.element = f.at("element").get<std::string>();
      out.push_back(std::move(fault));
    } catch (const std::exception& ex) {
      throw Error(Errc::parse, "fault " + std::to_string(i) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Fault> load_faults(std::string_view file_or_json) {
  const std::string arg(file_or_json);
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec)) return parse_faults(parse_located(read_file(arg), arg));
  return parse_faults(parse_located(arg, "inline fault plan"));
}

SimDevice::SimDevice(AppModel model, std::vector<Fault> faults, std::shared_ptr<Clock> clock,
                     DeviceLatency latency)
    : model_(std::move(model)), faults_(std::move(faults)), clock_(std::move(clock)), latency_(latency) {
  if (auto problems = validate_app(model_); !problems.empty()) throw ValidationError(std::move(problems));
  for (const auto& f : faults_) {
    if (!model_.find_element(f.page, f.element)) {
      throw ValidationError({"fault targets unknown element " + f.page + "/" + f.element});
    }
  }
  reset();
}

void SimDevice::reset() {
  current_ = model_.initial_page;
  history_.clear();
  offsets_.clear();
  fields_.clear();
  focused_.reset();
  counter_ = 0;
  spent_deadends_.clear();
}

std::size_t SimDevice::scroll_offset(const std::string& page) const {
  auto it = offsets_.find(page);
  return it == offsets_.end() ? 0 : it->second;
}

std::string SimDevice::field_value(const std::string& page, const std::string& element) const {
  auto it = fields_.find({page, element});
  return it == fields_.end() ? std::string{} : it->second;
}

std::vector<const AppElement*> SimDevice::layout(const std::string& page) const {
  const auto& elements = model_.pages.at(page).elements;
  auto active = [&](const AppElement& e, FaultEffect effect) {
    return std::any_of(faults_.begin(), faults_.end(), [&](const Fault& f) {
      return f.effect == effect && f.page == page && f.element == e.local_id && counter_ >= f.trigger_step;
    });
  };
  std::vector<const AppElement*> out;
  std::vector<const AppElement*> moved;
  for (const auto& e : elements) {
    if (active(e, FaultEffect::remove_element)) continue;
    if (active(e, FaultEffect::relocate_element)) {
      moved.push_back(&e);
      continue;
    }
    out.push_back(&e);
  }
  if (!moved.empty()) {
    // Relocated elements start a fresh window past the remaining content.
    const auto v = model_.viewport;
    const auto start = std::max(v, (out.size() + v - 1) / v * v);
    out.resize(start, nullptr);
    out.insert(out.end(), moved.begin(), moved.end());
  }
  return out;
}

std::vector<const AppElement*> SimDevice::visible() const {
  const auto all = layout(current_);
  const auto off = std::min(scroll_offset(current_), all.size());
  const auto end = std::min(off + model_.viewport, all.size());
  std::vector<const AppElement*> out;
  for (auto i = off; i < end; ++i) {
    if (all[i]) out.push_back(all[i]);
  }
  return out;
}

ScreenObservation SimDevice::observe() {
  clock_->advance(latency_.observe_ms);
  ScreenObservation obs;
  obs.raster_ref = "sim://" + model_.app_name + "/" + current_ + "@" + std::to_string(scroll_offset(current_));
  obs.captured_at = clock_->now_ms();
  for (const auto* e : visible()) {
    DetectedElement d;
    d.index = obs.elements.size();
    d.bbox = e->bbox;
    d.role_hint = e->role_hint;
    d.visual_descriptor = e->visual_descriptor;
    const auto value = field_value(current_, e->local_id);
    d.ocr_text = value.empty() ? e->ocr_text : value;
    obs.elements.push_back(std::move(d));
  }
  return obs;
}

const Transition* SimDevice::transition_for(const std::string& element, BasicActionKind kind) const {
  const Transition* plain = nullptr;
  for (const auto& t : model_.transitions) {
    if (t.page != current_ || t.element != element || t.kind != kind) continue;
    if (!t.guard_field_nonempty) {
      plain = &t;
    } else if (!field_value(current_, *t.guard_field_nonempty).empty()) {
      return &t;
    }
  }
  return plain;
}

ActionResult SimDevice::perform(const ActionInvocation& inv) {
  clock_->advance(latency_.action_ms);
  if (auto problems = validate_invocation(inv); !problems.empty()) {
    return ActionResult::error(problems.front());
  }

  const AppElement* target = nullptr;
  if (inv.target) {
    const auto* idx = std::get_if<DetectedIndex>(&*inv.target);
    if (!idx) return ActionResult::error("simulator targets must be detected indices");
    const auto on_screen = visible();
    if (idx->value >= on_screen.size()) {
      return ActionResult::error("target index " + std::to_string(idx->value) + " not on screen");
    }
    target = on_screen[idx->value];
  }

  switch (inv.kind) {
    case BasicActionKind::tap:
    case BasicActionKind::long_press: {
      const auto* t = transition_for(target->local_id, inv.kind);
      if (!t) {
        if (inv.kind == BasicActionKind::tap && model_.text_fields.contains({current_, target->local_id})) {
          focused_ = target->local_id;
        }
        break;
      }
      bool swallowed = false;
      for (std::size_t i = 0; i < faults_.size(); ++i) {
        const auto& f = faults_[i];
        if (f.effect == FaultEffect::deadend_transition && f.page == current_ &&
            f.element == target->local_id && counter_ >= f.trigger_step && !spent_deadends_.contains(i)) {
          spent_deadends_.insert(i);
          swallowed = true;
          break;
        }
      }
      if (swallowed) break;
      if (t->target_page != current_) {
        history_.push_back(current_);
        current_ = t->target_page;
        focused_.reset();
      }
      break;
    }
    case BasicActionKind::text:
      if (!model_.text_fields.contains({current_, target->local_id})) {
        return ActionResult::error("element \"" + target->local_id + "\" does not accept text");
      }
      fields_[{current_, target->local_id}] = *inv.text_payload;
      focused_ = target->local_id;
      break;
    case BasicActionKind::swipe: {
      const auto dir = inv.swipe_params->direction;
      if (dir != SwipeDirection::up && dir != SwipeDirection::down) break;
      const auto n = layout(current_).size();
      const auto v = model_.viewport;
      const auto max_off = n == 0 ? 0 : (n - 1) / v * v;
      auto& off = offsets_[current_];
      off = dir == SwipeDirection::down ? std::min(off + v, max_off) : (off >= v ? off - v : 0);
      break;
    }
    case BasicActionKind::back:
      if (!history_.empty()) {
        current_ = history_.back();
        history_.pop_back();
        focused_.reset();
      }
      break;
  }
  ++counter_;
  return ActionResult::success();
}

}  // namespace evoagent
