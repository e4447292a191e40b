#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "evoagent/action_space.hpp"
#include "evoagent/clock.hpp"
#include "evoagent/embedding.hpp"
#include "evoagent/ids.hpp"
#include "evoagent/observation.hpp"

namespace evoagent {

enum class RequestKind {
  plan_next,
  describe_triple,
  merge_descriptions,
  judge_repetitive,
  synthesize_shortcut,
  check_applicable,
};

inline constexpr std::array<RequestKind, 6> kRequestKinds = {
    RequestKind::plan_next,          RequestKind::describe_triple,
    RequestKind::merge_descriptions, RequestKind::judge_repetitive,
    RequestKind::synthesize_shortcut, RequestKind::check_applicable};

std::string_view to_string(RequestKind kind);
std::optional<RequestKind> parse_request_kind(std::string_view name);

struct ReasonerUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total() const noexcept { return prompt_tokens + completion_tokens; }
  ReasonerUsage& operator+=(const ReasonerUsage& o) noexcept {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  friend ReasonerUsage operator+(ReasonerUsage a, const ReasonerUsage& b) noexcept { return a += b; }
  bool operator==(const ReasonerUsage&) const = default;
};

void to_json(nlohmann::json& j, const ReasonerUsage& u);
void from_json(const nlohmann::json& j, ReasonerUsage& u);

struct ReasonerRequest {
  RequestKind kind = RequestKind::plan_next;
  std::string task;
  nlohmann::json payload = nlohmann::json::object();

  /// {"kind", "task", "payload"}: the value the digest and token proxy are computed over.
  nlohmann::json canonical() const;
  /// 16 hex digits of FNV-1a 64 over the canonical dump.
  std::string digest() const;
};

struct ReasonerResponse {
  nlohmann::json body;
  ReasonerUsage usage;
};

/// Throws Errc::payload_shape if the payload lacks a field its kind needs.
void check_payload_shape(const ReasonerRequest& request);

// Transport-level seam: scripted fixtures, a remote chat endpoint, or a replayed transcript.
class ReasonerBackend {
 public:
  virtual ~ReasonerBackend() = default;
  virtual ReasonerResponse complete(const ReasonerRequest& request) = 0;
};

struct CallRecord {
  RequestKind kind;
  std::string digest;
  ReasonerUsage usage;
};

// Records every call that passes through, independent of the Reasoner's own counters.
class InstrumentedBackend final : public ReasonerBackend {
 public:
  explicit InstrumentedBackend(ReasonerBackend& inner) : inner_(&inner) {}

  ReasonerResponse complete(const ReasonerRequest& request) override;

  const std::vector<CallRecord>& log() const noexcept { return log_; }
  std::size_t count(RequestKind kind) const;
  ReasonerUsage total_usage() const;
  void clear() { log_.clear(); }

 private:
  ReasonerBackend* inner_;
  std::vector<CallRecord> log_;
};

struct LatencyModel {
  std::int64_t base_ms = 500;
  std::int64_t per_token_ms = 2;
  double jitter = 0.1;  // uniform ±fraction applied to each call
  std::uint64_t seed = 0;
};

// Charges a simulated inference delay to a clock for each call.
class SimulatedLatencyBackend final : public ReasonerBackend {
 public:
  SimulatedLatencyBackend(ReasonerBackend& inner, Clock& clock, LatencyModel model);

  ReasonerResponse complete(const ReasonerRequest& request) override;

 private:
  ReasonerBackend* inner_;
  Clock* clock_;
  LatencyModel model_;
  SplitMix64 rng_;
};

// --- typed operations --------------------------------------------------------------------

struct HistoryEntry {
  BasicActionKind kind = BasicActionKind::tap;
  std::string descriptor;  // empty when the action had no element
  std::optional<std::string> text;
};

struct PlanAct {
  ActionInvocation invocation;  // targets are detected indices on the planning observation
  bool completes_task = false;
};
struct PlanFinish {
  std::string summary;
};
struct PlanFail {
  std::string reason;
};
using PlanDecision = std::variant<PlanAct, PlanFinish, PlanFail>;

struct PageContext {
  PageId id;
  std::vector<DetectedElement> elements;
  std::string description;
};

struct TripleContext {
  PageContext source;
  ElementId element;
  std::string element_descriptor;
  std::string element_ocr;
  std::string element_role;
  BasicActionKind action = BasicActionKind::tap;
  std::optional<std::string> action_text;
  PageContext target;
};

struct TripleDescriptions {
  std::string source_page;
  std::string element;
  std::string target_page;
};

struct SliceStep {
  ElementId element;
  std::string descriptor;
  BasicActionKind kind = BasicActionKind::tap;
  std::optional<std::string> text;
  std::optional<SwipeParams> swipe;
  std::string element_description;
  std::string page_description;
};

struct ShortcutDraft {
  std::string name;
  std::string description;
  std::string applicability;
  std::vector<std::string> templates;  // one per slice step
};

struct ShortcutContext {
  HighLevelAction action;
  std::vector<std::string> step_descriptors;
  std::vector<std::string> step_descriptions;
};

struct Applicability {
  bool applicable = false;
  Bindings bindings;
  bool completes_task = false;
  std::string reason;
};

template <class T>
struct Reasoned {
  T value;
  ReasonerUsage usage;
};

// Typed front end over a backend: builds payloads, checks their shape, parses replies, and
// counts calls per kind.
class Reasoner {
 public:
  explicit Reasoner(ReasonerBackend& backend) : backend_(&backend) {}

  Reasoned<PlanDecision> plan_next(const std::string& task, const ScreenObservation& obs,
                                   const std::vector<HistoryEntry>& history);
  Reasoned<TripleDescriptions> describe_triple(const std::string& task, const TripleContext& triple);
  /// Throws Errc::empty_list.
  Reasoned<std::string> merge_page_descriptions(const std::vector<std::string>& descriptions,
                                                const std::string& task, PageId page);
  Reasoned<bool> judge_repetitive(const std::string& task, const std::vector<SliceStep>& steps);
  /// Throws Errc::slice_too_short for fewer than two steps.
  Reasoned<ShortcutDraft> synthesize_shortcut(const std::string& task,
                                              const std::vector<SliceStep>& slice);
  Reasoned<Applicability> check_applicable(const std::string& task, const ShortcutContext& shortcut,
                                           const ScreenObservation& obs);

  /// Raw entry point; checks payload shape before dispatch.
  ReasonerResponse request(const ReasonerRequest& request);

  std::size_t calls(RequestKind kind) const;
  const std::map<RequestKind, std::size_t>& calls_by_kind() const noexcept { return calls_; }
  const ReasonerUsage& total_usage() const noexcept { return usage_; }

 private:
  ReasonerBackend* backend_;
  std::map<RequestKind, std::size_t> calls_;
  ReasonerUsage usage_;
};

/// Payload encoding of an observation shared by plan_next and check_applicable.
nlohmann::json observation_payload(const ScreenObservation& obs);

}  // namespace evoagent
