#include "evoagent/action_space.hpp"

#include <algorithm>
#include <cctype>

#include "evoagent/error.hpp"

namespace evoagent {

std::string_view to_string(BasicActionKind kind) {
  switch (kind) {
    case BasicActionKind::tap: return "tap";
    case BasicActionKind::long_press: return "long_press";
    case BasicActionKind::swipe: return "swipe";
    case BasicActionKind::text: return "text";
    case BasicActionKind::back: return "back";
  }
  return "?";
}

std::optional<BasicActionKind> parse_action_kind(std::string_view name) {
  for (auto kind : kBasicActionKinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(SwipeDirection direction) {
  switch (direction) {
    case SwipeDirection::up: return "up";
    case SwipeDirection::down: return "down";
    case SwipeDirection::left: return "left";
    case SwipeDirection::right: return "right";
  }
  return "?";
}

std::optional<SwipeDirection> parse_swipe_direction(std::string_view name) {
  for (auto d : {SwipeDirection::up, SwipeDirection::down, SwipeDirection::left,
                 SwipeDirection::right}) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

ActionInvocation ActionInvocation::tap(ElementRef target) {
  return {BasicActionKind::tap, target, std::nullopt, std::nullopt};
}

ActionInvocation ActionInvocation::long_press(ElementRef target) {
  return {BasicActionKind::long_press, target, std::nullopt, std::nullopt};
}

ActionInvocation ActionInvocation::text(ElementRef target, std::string payload) {
  return {BasicActionKind::text, target, std::move(payload), std::nullopt};
}

ActionInvocation ActionInvocation::swipe(SwipeParams params) {
  return {BasicActionKind::swipe, std::nullopt, std::nullopt, params};
}

ActionInvocation ActionInvocation::back() { return {}; }

std::vector<std::string> validate_invocation(const ActionInvocation& inv) {
  std::vector<std::string> violations;
  const std::string name(to_string(inv.kind));
  auto require = [&](bool present, std::string_view field) {
    if (!present) violations.push_back(name + " requires " + std::string(field));
  };
  auto forbid = [&](bool present, std::string_view field) {
    if (present) violations.push_back(name + " forbids " + std::string(field));
  };

  switch (inv.kind) {
    case BasicActionKind::tap:
    case BasicActionKind::long_press:
      require(inv.target.has_value(), "target");
      forbid(inv.text_payload.has_value(), "text_payload");
      forbid(inv.swipe_params.has_value(), "swipe_params");
      break;
    case BasicActionKind::text:
      require(inv.target.has_value(), "target");
      require(inv.text_payload.has_value(), "text_payload");
      forbid(inv.swipe_params.has_value(), "swipe_params");
      break;
    case BasicActionKind::swipe:
      require(inv.swipe_params.has_value(), "swipe_params");
      forbid(inv.text_payload.has_value(), "text_payload");
      if (inv.swipe_params &&
          !(inv.swipe_params->magnitude > 0.0 && inv.swipe_params->magnitude <= 1.0)) {
        violations.push_back("swipe magnitude must lie in (0, 1]");
      }
      break;
    case BasicActionKind::back:
      forbid(inv.target.has_value(), "target");
      forbid(inv.text_payload.has_value(), "text_payload");
      forbid(inv.swipe_params.has_value(), "swipe_params");
      break;
  }
  return violations;
}

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    const auto close = tmpl.find('}', pos + 1);
    if (close == std::string_view::npos) {
      throw Error(Errc::invalid_argument,
                  "unterminated placeholder in template \"" + std::string(tmpl) + "\"");
    }
    const auto name = tmpl.substr(pos + 1, close - pos - 1);
    const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_';
    });
    if (!ok) {
      throw Error(Errc::invalid_argument,
                  "bad placeholder name in template \"" + std::string(tmpl) + "\"");
    }
    names.emplace_back(name);
    pos = close + 1;
  }
  return names;
}

std::vector<std::string> HighLevelAction::parameters() const {
  std::vector<std::string> out;
  for (const auto& step : steps) {
    for (auto& name : template_placeholders(step.param_template)) {
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
    }
  }
  return out;
}

void check_high_level_steps(const std::vector<HighLevelStep>& steps) {
  if (steps.empty()) throw Error(Errc::empty_steps, "high-level action has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& step = steps[i];
    if (!step.element) {
      throw Error(Errc::invalid_argument, "step " + std::to_string(i + 1) + " has no element");
    }
    if (step.kind == BasicActionKind::back) {
      throw Error(Errc::invalid_argument,
                  "step " + std::to_string(i + 1) + ": back cannot target an element");
    }
    if (step.kind == BasicActionKind::swipe && !step.swipe_params) {
      throw Error(Errc::invalid_argument,
                  "step " + std::to_string(i + 1) + ": swipe step needs swipe params");
    }
    if (step.kind != BasicActionKind::text && !step.param_template.empty()) {
      throw Error(Errc::invalid_argument, "step " + std::to_string(i + 1) + ": " +
                                              std::string(to_string(step.kind)) +
                                              " takes no text template");
    }
    template_placeholders(step.param_template);
  }
}

void check_high_level_action(const HighLevelAction& hla) {
  if (!hla.id) throw Error(Errc::invalid_argument, "high-level action has no id");
  check_high_level_steps(hla.steps);
}

const HighLevelAction* ActionSpace::find(ShortcutId id) const {
  auto it = high_level_.find(id);
  return it == high_level_.end() ? nullptr : &it->second;
}

ActionSpace expand(const ActionSpace& space, HighLevelAction hla) {
  check_high_level_action(hla);
  if (space.contains(hla.id)) {
    throw Error(Errc::duplicate_id,
                "high-level action " + to_string(hla.id) + " already in the action space");
  }
  ActionSpace next = space;
  const auto id = hla.id;
  next.high_level_.emplace(id, std::move(hla));
  return next;
}

namespace {

std::string fill_template(const std::string& tmpl, const Bindings& bindings) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    const auto close = tmpl.find('}', open + 1);
    out.append(tmpl, pos, open - pos);
    const auto name = tmpl.substr(open + 1, close - open - 1);
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error(Errc::missing_binding, "missing binding for placeholder \"" + name + "\"");
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

}  // namespace

std::vector<ActionInvocation> instantiate(const HighLevelAction& hla, const Bindings& bindings) {
  // Surface every unbound name before building anything.
  for (const auto& name : hla.parameters()) {
    if (!bindings.contains(name)) {
      throw Error(Errc::missing_binding, "missing binding for placeholder \"" + name + "\"");
    }
  }

  std::vector<ActionInvocation> out;
  out.reserve(hla.steps.size());
  for (std::size_t i = 0; i < hla.steps.size(); ++i) {
    const auto& step = hla.steps[i];
    ActionInvocation inv;
    inv.kind = step.kind;
    inv.target = step.element;
    if (step.kind == BasicActionKind::text) {
      inv.text_payload = fill_template(step.param_template, bindings);
    } else if (!step.param_template.empty()) {
      inv.text_payload = fill_template(step.param_template, bindings);
    }
    if (step.kind == BasicActionKind::swipe) inv.swipe_params = step.swipe_params;

    if (auto violations = validate_invocation(inv); !violations.empty()) {
      throw Error(Errc::invalid_invocation,
                  "step " + std::to_string(i + 1) + ": " + violations.front());
    }
    out.push_back(std::move(inv));
  }
  return out;
}

}  // namespace evoagent
