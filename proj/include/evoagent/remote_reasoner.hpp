#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evoagent/reasoner.hpp"

namespace evoagent {

struct RemoteConfig {
  std::string endpoint;  // full URL of a chat-completions route
  std::string api_key;
  std::string model;
  std::optional<std::filesystem::path> transcript;
  int timeout_seconds = 120;
};

/// Reads REASONER_ENDPOINT, REASONER_API_KEY, REASONER_MODEL. Throws Errc::invalid_argument
/// when the endpoint is unset.
RemoteConfig remote_config_from_env();

/// {model, messages:[system, user], temperature:0}; the user message carries the canonical request.
nlohmann::json build_chat_request(const ReasonerRequest& request, const std::string& model);

/// Pulls the JSON reply out of choices[0].message.content (code fences tolerated) and the
/// usage block. Throws Errc::parse.
ReasonerResponse parse_chat_response(const nlohmann::json& response);

// Chat-completion client. One retry on transport failure (connection error or 5xx); each
// exchange is appended to the transcript as {"request": ..., "response": ...}.
class RemoteBackend final : public ReasonerBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  ReasonerResponse complete(const ReasonerRequest& request) override;

 private:
  nlohmann::json post(const nlohmann::json& body);

  RemoteConfig config_;
  std::string base_;
  std::string path_;
  std::ofstream transcript_;
};

// Plays a transcript back in order. A request that differs from the recorded one is an error.
class ReplayBackend final : public ReasonerBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& transcript);

  ReasonerResponse complete(const ReasonerRequest& request) override;
  std::size_t remaining() const noexcept { return records_.size() - next_; }

 private:
  std::vector<nlohmann::json> records_;
  std::size_t next_ = 0;
};

}  // namespace evoagent
