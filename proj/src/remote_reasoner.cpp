#include "evoagent/remote_reasoner.hpp"

#include <cstdlib>

#include "httplib.h"

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

RemoteConfig remote_config_from_env() {
  RemoteConfig cfg;
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? v : "";
  };
  cfg.endpoint = env("REASONER_ENDPOINT");
  cfg.api_key = env("REASONER_API_KEY");
  cfg.model = env("REASONER_MODEL");
  if (cfg.endpoint.empty()) {
    throw Error(Errc::invalid_argument, "REASONER_ENDPOINT is not set");
  }
  return cfg;
}

namespace {

std::string_view reply_schema(RequestKind kind) {
  switch (kind) {
    case RequestKind::plan_next:
      return R"({"decision":"act","action":{"kind":"tap|long_press|swipe|text|back","target":<element index>,"text":"...","direction":"up|down|left|right","magnitude":1.0},"completes_task":false} or {"decision":"finish","summary":"..."} or {"decision":"fail","reason":"..."})";
    case RequestKind::describe_triple:
      return R"({"source_page":"...","element":"...","target_page":"..."})";
    case RequestKind::merge_descriptions:
      return R"({"description":"..."})";
    case RequestKind::judge_repetitive:
      return R"({"repetitive":true|false})";
    case RequestKind::synthesize_shortcut:
      return R"({"name":"...","description":"...","applicability":"...","templates":["", "{query}", ...]})";
    case RequestKind::check_applicable:
      return R"({"applicable":true,"bindings":{"name":"value"},"completes_task":false} or {"applicable":false,"reason":"..."})";
  }
  return "{}";
}

std::string_view duty(RequestKind kind) {
  switch (kind) {
    case RequestKind::plan_next:
      return "You operate a smartphone app. Pick the next action on the current screen for the task.";
    case RequestKind::describe_triple:
      return "Describe the source page, the function of the acted element, and the target page.";
    case RequestKind::merge_descriptions:
      return "Merge these descriptions of one page into a single description, keeping the task in mind.";
    case RequestKind::judge_repetitive:
      return "Decide whether this task's action sequence contains routine patterns worth a shortcut.";
    case RequestKind::synthesize_shortcut:
      return "Name and describe a shortcut for these steps, say when it applies, and give one "
             "argument template per step using {name} for free arguments.";
    case RequestKind::check_applicable:
      return "Decide whether the shortcut can run on this screen for the task and bind its parameters.";
  }
  return "";
}

std::string strip_fences(std::string text) {
  auto first = text.find("```");
  if (first == std::string::npos) return text;
  auto line_end = text.find('\n', first);
  auto last = text.rfind("```");
  if (line_end == std::string::npos || last <= line_end) return text;
  return text.substr(line_end + 1, last - line_end - 1);
}

void split_url(const std::string& url, std::string& base, std::string& path) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(Errc::invalid_argument, "endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  base = slash == std::string::npos ? url : url.substr(0, slash);
  path = slash == std::string::npos ? "/" : url.substr(slash);
}

}  // namespace

json build_chat_request(const ReasonerRequest& request, const std::string& model) {
  std::string system(duty(request.kind));
  system += " Reply with JSON only, shaped as: ";
  system += reply_schema(request.kind);
  return json{{"model", model},
              {"temperature", 0},
              {"messages", json::array({json{{"role", "system"}, {"content", system}},
                                        json{{"role", "user"},
                                             {"content", canonical_dump(request.canonical())}}})}};
}

ReasonerResponse parse_chat_response(const json& response) {
  try {
    const auto content =
        response.at("choices").at(0).at("message").at("content").get<std::string>();
    ReasonerResponse out;
    out.body = json::parse(strip_fences(content));
    if (auto it = response.find("usage"); it != response.end()) out.usage = it->get<ReasonerUsage>();
    return out;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw Error(Errc::parse, std::string("bad chat response: ") + ex.what());
  }
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint, base_, path_);
  if (config_.transcript) {
    transcript_.open(*config_.transcript, std::ios::app);
    if (!transcript_) throw Error(Errc::io, "cannot open transcript " + config_.transcript->string());
  }
}

json RemoteBackend::post(const json& body) {
  httplib::Client client(base_);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(Errc::transport, "server returned " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& ex) {
      throw Error(Errc::parse, std::string("response is not JSON: ") + ex.what());
    }
  }
  throw Error(Errc::transport, last_error);
}

ReasonerResponse RemoteBackend::complete(const ReasonerRequest& request) {
  const auto body = build_chat_request(request, config_.model);
  const auto raw = post(body);
  if (transcript_.is_open()) {
    transcript_ << canonical_dump(json{{"request", body}, {"response", raw}}) << '\n';
    transcript_.flush();
  }
  return parse_chat_response(raw);
}

ReplayBackend::ReplayBackend(const std::filesystem::path& transcript) {
  std::ifstream in(transcript);
  if (!in) throw Error(Errc::io, "cannot read transcript " + transcript.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto rec = json::parse(line);
      if (!rec.contains("request") || !rec.contains("response")) {
        throw Error(Errc::malformed_record, "missing request/response");
      }
      records_.push_back(std::move(rec));
    } catch (const std::exception& ex) {
      throw Error(Errc::malformed_record, "transcript line " + std::to_string(n) + ": " + ex.what());
    }
  }
}

ReasonerResponse ReplayBackend::complete(const ReasonerRequest& request) {
  if (next_ >= records_.size()) {
    throw Error(Errc::missing_fixture, "transcript exhausted at " + std::string(to_string(request.kind)) +
                                           " request " + request.digest());
  }
  const auto& rec = records_[next_];
  const auto expected = build_chat_request(request, rec.at("request").value("model", ""));
  if (expected != rec.at("request")) {
    throw Error(Errc::missing_fixture, "transcript diverges at record " + std::to_string(next_ + 1) +
                                           " (" + std::string(to_string(request.kind)) + ")");
  }
  ++next_;
  return parse_chat_response(rec.at("response"));
}

}  // namespace evoagent
