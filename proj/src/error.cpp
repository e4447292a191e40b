#include "evoagent/error.hpp"

#include "evoagent/clock.hpp"

#include <chrono>

namespace evoagent {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::duplicate_id: return "duplicate-id";
    case Errc::missing_binding: return "missing-binding";
    case Errc::invalid_invocation: return "invalid-invocation";
    case Errc::unknown_page: return "unknown-page";
    case Errc::unknown_node: return "unknown-node";
    case Errc::unknown_element: return "unknown-element";
    case Errc::empty_steps: return "empty-steps";
    case Errc::non_normalized: return "non-normalized-query";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::empty_descriptor: return "empty-descriptor";
    case Errc::malformed_record: return "malformed-record";
    case Errc::referential_integrity: return "referential-integrity";
    case Errc::missing_fixture: return "missing-fixture";
    case Errc::payload_shape: return "payload-shape";
    case Errc::empty_list: return "empty-list";
    case Errc::slice_too_short: return "slice-too-short";
    case Errc::broken_chain: return "broken-chain";
    case Errc::unknown_id: return "unknown-id";
    case Errc::transport: return "transport";
    case Errc::parse: return "parse";
    case Errc::validation: return "validation";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::zero_variance: return "zero-variance";
    case Errc::suite_mismatch: return "suite-mismatch";
    case Errc::precondition: return "precondition";
    case Errc::io: return "io";
  }
  return "unknown";
}

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "validation failed";
  for (const auto& p : problems) {
    out += "\n  - ";
    out += p;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : Error(Errc::validation, join_problems(problems)), problems_(std::move(problems)) {}

std::int64_t SystemClock::now_ms() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace evoagent
