#pragma once

#include <string>

#include "evoagent/action_space.hpp"
#include "evoagent/observation.hpp"

namespace evoagent {

struct ActionResult {
  bool ok = true;
  std::string reason;

  static ActionResult success() { return {}; }
  static ActionResult error(std::string why) { return {false, std::move(why)}; }
};

// What the executor drives: a real phone bridge or the simulator. Targets are detected
// indices on the most recent observation.
class Device {
 public:
  virtual ~Device() = default;
  virtual ScreenObservation observe() = 0;
  virtual ActionResult perform(const ActionInvocation& invocation) = 0;
  virtual void reset() = 0;
};

}  // namespace evoagent
