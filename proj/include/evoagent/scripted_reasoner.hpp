#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "evoagent/reasoner.hpp"

namespace evoagent {

// One canned reply. `match` is either {"digest": "..."} or a structured matcher; every key
// present must hold for the request:
//   task         exact task text
//   visible      descriptors that must all be on the observation
//   absent       descriptors that must not be on the observation
//   ocr          {descriptor: text} for the first element with that descriptor
//   last_action  kind of the newest history entry, or "none"
//   element      describe_triple element descriptor
//   action       describe_triple action kind
//   shortcut     check_applicable shortcut name
//   sequence     exact descriptor sequence of judge/synthesize steps
//   page         merge page id
//   payload      JSON that must be a recursive subset of the payload (arrays compare whole)
struct Fixture {
  RequestKind kind = RequestKind::plan_next;
  nlohmann::json match = nlohmann::json::object();
  nlohmann::json response;
  std::optional<ReasonerUsage> usage;
};

/// Throws Errc::parse naming an unknown matcher key.
void check_matcher(const nlohmann::json& match);
bool fixture_matches(const Fixture& fixture, const ReasonerRequest& request);

/// ceil(length / 4): the token proxy used for scripted replies.
std::int64_t token_proxy(std::size_t characters) noexcept;

// Deterministic fixture-driven reasoner: first matching fixture in file order wins. A pure
// function of (kind, canonical payload). Merge requests without a fixture fall back to
// de-duplicating and joining with "; ".
class ScriptedBackend final : public ReasonerBackend {
 public:
  explicit ScriptedBackend(std::vector<Fixture> fixtures);

  /// {"fixtures": [...]} or a bare array. Throws Errc::parse / Errc::io.
  static ScriptedBackend from_json(const nlohmann::json& doc);
  static ScriptedBackend from_file(const std::filesystem::path& file);

  /// Throws Errc::missing_fixture carrying the request kind and digest.
  ReasonerResponse complete(const ReasonerRequest& request) override;

  const std::vector<Fixture>& fixtures() const noexcept { return fixtures_; }

 private:
  std::vector<Fixture> fixtures_;
};

}  // namespace evoagent
