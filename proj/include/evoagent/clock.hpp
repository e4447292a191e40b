#pragma once

#include <cstdint>

namespace evoagent {

// Millisecond time source. Simulated components charge latency through advance();
// the wall clock ignores it because real time passes on its own.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
  virtual void advance(std::int64_t ms) = 0;
};

class SystemClock final : public Clock {
 public:
  std::int64_t now_ms() const override;
  void advance(std::int64_t) override {}
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

  std::int64_t now_ms() const override { return now_; }
  void advance(std::int64_t ms) override { now_ += ms; }

 private:
  std::int64_t now_;
};

}  // namespace evoagent
