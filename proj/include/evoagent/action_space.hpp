#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "evoagent/ids.hpp"

namespace evoagent {

enum class BasicActionKind { tap, long_press, swipe, text, back };

inline constexpr std::array<BasicActionKind, 5> kBasicActionKinds = {
    BasicActionKind::tap, BasicActionKind::long_press, BasicActionKind::swipe,
    BasicActionKind::text, BasicActionKind::back};

std::string_view to_string(BasicActionKind kind);
std::optional<BasicActionKind> parse_action_kind(std::string_view name);

enum class SwipeDirection { up, down, left, right };

std::string_view to_string(SwipeDirection direction);
std::optional<SwipeDirection> parse_swipe_direction(std::string_view name);

struct SwipeParams {
  SwipeDirection direction = SwipeDirection::down;
  double magnitude = 1.0;  // fraction of the screen, (0, 1]

  bool operator==(const SwipeParams&) const = default;
};

// Position of an element within one ScreenObservation.
struct DetectedIndex {
  std::size_t value = 0;
  auto operator<=>(const DetectedIndex&) const = default;
};

using ElementRef = std::variant<DetectedIndex, ElementId>;

struct ActionInvocation {
  BasicActionKind kind = BasicActionKind::back;
  std::optional<ElementRef> target;
  std::optional<std::string> text_payload;
  std::optional<SwipeParams> swipe_params;

  static ActionInvocation tap(ElementRef target);
  static ActionInvocation long_press(ElementRef target);
  static ActionInvocation text(ElementRef target, std::string payload);
  static ActionInvocation swipe(SwipeParams params);
  static ActionInvocation back();

  bool operator==(const ActionInvocation&) const = default;
};

/// Empty result means the invocation is well-formed; otherwise one message per broken rule.
std::vector<std::string> validate_invocation(const ActionInvocation& inv);

struct HighLevelStep {
  ElementId element;
  BasicActionKind kind = BasicActionKind::tap;
  std::string param_template;  // `{name}` slots, verbatim substitution
  std::optional<SwipeParams> swipe_params;

  bool operator==(const HighLevelStep&) const = default;
};

struct HighLevelAction {
  ShortcutId id;
  std::string name;
  std::string description;
  std::string applicability;
  std::vector<HighLevelStep> steps;
  std::vector<std::string> source_trajectory_ids;

  /// Distinct placeholder names in step order of first appearance.
  std::vector<std::string> parameters() const;

  bool operator==(const HighLevelAction&) const = default;
};

// What a synthesized shortcut looks like before it has a node id.
struct ShortcutSpec {
  std::string name;
  std::string description;
  std::string applicability;
  std::vector<HighLevelStep> steps;
  std::vector<std::string> source_trajectory_ids;
};

/// Placeholder names in a template, in order (duplicates kept).
/// Throws Errc::invalid_argument on an unterminated or empty `{}` slot.
std::vector<std::string> template_placeholders(std::string_view tmpl);

/// Throws Errc::invalid_argument naming the first broken HighLevelAction rule.
void check_high_level_action(const HighLevelAction& hla);
void check_high_level_steps(const std::vector<HighLevelStep>& steps);

// Basic set plus synthesized high-level actions. Values are immutable; expand()
// returns a new space.
class ActionSpace {
 public:
  ActionSpace() = default;

  const std::array<BasicActionKind, 5>& basic() const noexcept { return kBasicActionKinds; }
  const std::map<ShortcutId, HighLevelAction>& high_level() const noexcept { return high_level_; }
  const HighLevelAction* find(ShortcutId id) const;
  bool contains(ShortcutId id) const { return find(id) != nullptr; }
  std::size_t size() const noexcept { return basic().size() + high_level_.size(); }

  bool operator==(const ActionSpace&) const = default;

  friend ActionSpace expand(const ActionSpace& space, HighLevelAction hla);

 private:
  std::map<ShortcutId, HighLevelAction> high_level_;
};

/// Union with one new high-level action. Throws Errc::duplicate_id if the id is taken.
ActionSpace expand(const ActionSpace& space, HighLevelAction hla);

using Bindings = std::map<std::string, std::string>;

/// Fills every step template and returns one invocation per step, targets as element-node ids.
/// Throws Errc::missing_binding naming the first unbound placeholder, or
/// Errc::invalid_invocation if a filled step breaks the kind rules.
std::vector<ActionInvocation> instantiate(const HighLevelAction& hla, const Bindings& bindings);

}  // namespace evoagent
