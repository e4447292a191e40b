#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "evoagent/clock.hpp"
#include "evoagent/device.hpp"

namespace evoagent {

struct AppElement {
  std::string local_id;
  std::string role_hint;
  std::string ocr_text;
  std::string visual_descriptor;
  BBox bbox;
};

struct AppPage {
  std::vector<AppElement> elements;
};

struct Transition {
  std::string page;
  std::string element;
  BasicActionKind kind = BasicActionKind::tap;  // tap or long_press
  std::optional<std::string> guard_field_nonempty;  // text field on the same page
  std::string target_page;
};

struct AppModel {
  std::string app_name;
  std::string initial_page;
  std::size_t viewport = 10;
  std::map<std::string, AppPage> pages;
  std::vector<Transition> transitions;
  std::set<std::pair<std::string, std::string>> text_fields;  // (page, element)

  const AppElement* find_element(const std::string& page, const std::string& local_id) const;
};

/// Every rule the model breaks; empty means valid.
std::vector<std::string> validate_app(const AppModel& model);

/// Throws ValidationError listing every problem.
AppModel parse_app(const nlohmann::json& doc);
/// Throws Errc::parse with the byte offset, or ValidationError.
AppModel load_app(const std::filesystem::path& file);

enum class FaultEffect { remove_element, relocate_element, deadend_transition };

std::string_view to_string(FaultEffect effect);

// remove/relocate take effect once trigger_step actions have succeeded and persist until
// reset; a dead end swallows the transition of the first matching action at or after the
// trigger, once.
struct Fault {
  std::size_t trigger_step = 0;
  FaultEffect effect = FaultEffect::remove_element;
  std::string page;
  std::string element;
};

/// {"faults": [...]} or a bare array. Throws Errc::parse.
std::vector<Fault> parse_faults(const nlohmann::json& doc);
/// A path to a fault file, or the JSON text itself.
std::vector<Fault> load_faults(std::string_view file_or_json);

struct DeviceLatency {
  std::int64_t observe_ms = 150;
  std::int64_t action_ms = 350;
};

class SimDevice final : public Device {
 public:
  explicit SimDevice(AppModel model, std::vector<Fault> faults = {},
                     std::shared_ptr<Clock> clock = std::make_shared<ManualClock>(),
                     DeviceLatency latency = {});

  ScreenObservation observe() override;
  ActionResult perform(const ActionInvocation& invocation) override;
  void reset() override;

  const AppModel& model() const noexcept { return model_; }
  const std::vector<Fault>& faults() const noexcept { return faults_; }
  const std::string& current_page() const noexcept { return current_; }
  const std::vector<std::string>& history() const noexcept { return history_; }
  std::size_t action_counter() const noexcept { return counter_; }
  std::size_t scroll_offset(const std::string& page) const;
  std::string field_value(const std::string& page, const std::string& element) const;

  /// The elements currently laid out on a page (faults applied), before windowing.
  std::vector<const AppElement*> layout(const std::string& page) const;

 private:
  std::vector<const AppElement*> visible() const;
  const Transition* transition_for(const std::string& element, BasicActionKind kind) const;

  AppModel model_;
  std::vector<Fault> faults_;
  std::shared_ptr<Clock> clock_;
  DeviceLatency latency_;

  std::string current_;
  std::vector<std::string> history_;
  std::map<std::string, std::size_t> offsets_;
  std::map<std::pair<std::string, std::string>, std::string> fields_;
  std::optional<std::string> focused_;
  std::size_t counter_ = 0;
  std::set<std::size_t> spent_deadends_;
};

}  // namespace evoagent
