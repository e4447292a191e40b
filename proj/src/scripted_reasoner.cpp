#include "evoagent/scripted_reasoner.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

namespace {

const std::set<std::string>& matcher_keys() {
  static const std::set<std::string> keys = {"digest", "task",   "visible",  "absent",
                                             "ocr",    "last_action", "element", "action",
                                             "shortcut", "sequence", "page", "payload"};
  return keys;
}

const json* observation_elements(const json& payload) {
  auto it = payload.find("observation");
  if (it == payload.end()) return nullptr;
  auto el = it->find("elements");
  return el == it->end() ? nullptr : &*el;
}

bool on_screen(const json* elements, const std::string& descriptor) {
  if (!elements) return false;
  return std::any_of(elements->begin(), elements->end(), [&](const json& e) {
    return e.value("visual_descriptor", "") == descriptor;
  });
}

bool is_subset(const json& want, const json& have) {
  if (want.is_object()) {
    if (!have.is_object()) return false;
    for (auto it = want.begin(); it != want.end(); ++it) {
      auto h = have.find(it.key());
      if (h == have.end() || !is_subset(it.value(), *h)) return false;
    }
    return true;
  }
  return want == have;
}

std::vector<std::string> step_descriptors(const json& payload) {
  std::vector<std::string> out;
  if (auto it = payload.find("steps"); it != payload.end()) {
    for (const auto& s : *it) out.push_back(s.value("descriptor", ""));
  }
  return out;
}

}  // namespace

void check_matcher(const json& match) {
  if (!match.is_object()) throw Error(Errc::parse, "fixture match must be an object");
  for (auto it = match.begin(); it != match.end(); ++it) {
    if (!matcher_keys().contains(it.key())) {
      throw Error(Errc::parse, "unknown fixture matcher key \"" + it.key() + "\"");
    }
  }
}

bool fixture_matches(const Fixture& f, const ReasonerRequest& r) {
  if (f.kind != r.kind) return false;
  const auto& m = f.match;
  const auto& p = r.payload;

  if (auto it = m.find("digest"); it != m.end() && it->get<std::string>() != r.digest()) return false;
  if (auto it = m.find("task"); it != m.end() && it->get<std::string>() != r.task) return false;

  const json* elements = observation_elements(p);
  if (auto it = m.find("visible"); it != m.end()) {
    for (const auto& d : *it) {
      if (!on_screen(elements, d.get<std::string>())) return false;
    }
  }
  if (auto it = m.find("absent"); it != m.end()) {
    for (const auto& d : *it) {
      if (on_screen(elements, d.get<std::string>())) return false;
    }
  }
  if (auto it = m.find("ocr"); it != m.end()) {
    for (auto o = it->begin(); o != it->end(); ++o) {
      if (!elements) return false;
      auto el = std::find_if(elements->begin(), elements->end(), [&](const json& e) {
        return e.value("visual_descriptor", "") == o.key();
      });
      if (el == elements->end() || el->value("ocr_text", "") != o.value().get<std::string>()) {
        return false;
      }
    }
  }
  if (auto it = m.find("last_action"); it != m.end()) {
    const auto hist = p.value("history", json::array());
    const std::string last = hist.empty() ? "none" : hist.back().value("kind", "");
    if (last != it->get<std::string>()) return false;
  }
  if (auto it = m.find("element"); it != m.end()) {
    if (!p.contains("element") ||
        p.at("element").value("visual_descriptor", "") != it->get<std::string>()) {
      return false;
    }
  }
  if (auto it = m.find("action"); it != m.end()) {
    if (!p.contains("action") || p.at("action").value("kind", "") != it->get<std::string>()) {
      return false;
    }
  }
  if (auto it = m.find("shortcut"); it != m.end()) {
    if (!p.contains("shortcut") ||
        p.at("shortcut").value("name", "") != it->get<std::string>()) {
      return false;
    }
  }
  if (auto it = m.find("sequence"); it != m.end()) {
    if (step_descriptors(p) != it->get<std::vector<std::string>>()) return false;
  }
  if (auto it = m.find("page"); it != m.end()) {
    if (p.value("page_id", json()) != *it) return false;
  }
  if (auto it = m.find("payload"); it != m.end() && !is_subset(*it, p)) return false;
  return true;
}

std::int64_t token_proxy(std::size_t characters) noexcept {
  return static_cast<std::int64_t>((characters + 3) / 4);
}

ScriptedBackend::ScriptedBackend(std::vector<Fixture> fixtures) : fixtures_(std::move(fixtures)) {
  for (const auto& f : fixtures_) check_matcher(f.match);
}

ScriptedBackend ScriptedBackend::from_json(const json& doc) {
  const json& list = doc.is_array() ? doc : doc.at("fixtures");
  std::vector<Fixture> fixtures;
  std::size_t n = 0;
  for (const auto& rec : list) {
    ++n;
    try {
      Fixture f;
      auto kind = parse_request_kind(rec.at("kind").get<std::string>());
      if (!kind) throw Error(Errc::parse, "unknown kind " + rec.at("kind").dump());
      f.kind = *kind;
      f.match = rec.value("match", json::object());
      f.response = rec.at("response");
      if (auto it = rec.find("usage"); it != rec.end()) f.usage = it->get<ReasonerUsage>();
      check_matcher(f.match);
      fixtures.push_back(std::move(f));
    } catch (const std::exception& ex) {
      throw Error(Errc::parse, "fixture " + std::to_string(n) + ": " + ex.what());
    }
  }
  return ScriptedBackend(std::move(fixtures));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::io, "cannot read fixture file " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw Error(Errc::parse, file.string() + ": " + ex.what());
  }
  return from_json(doc);
}

ReasonerResponse ScriptedBackend::complete(const ReasonerRequest& request) {
  const auto prompt = token_proxy(canonical_dump(request.canonical()).size());
  for (const auto& f : fixtures_) {
    if (!fixture_matches(f, request)) continue;
    ReasonerUsage usage{prompt, token_proxy(canonical_dump(f.response).size())};
    if (f.usage) usage = *f.usage;
    return {f.response, usage};
  }

  if (request.kind == RequestKind::merge_descriptions) {
    std::vector<std::string> seen;
    std::string merged;
    for (const auto& d : request.payload.at("descriptions")) {
      const auto text = d.get<std::string>();
      if (std::find(seen.begin(), seen.end(), text) != seen.end()) continue;
      seen.push_back(text);
      if (!merged.empty()) merged += "; ";
      merged += text;
    }
    json body{{"description", merged}};
    return {body, ReasonerUsage{prompt, token_proxy(canonical_dump(body).size())}};
  }

  throw Error(Errc::missing_fixture, "no fixture for " + std::string(to_string(request.kind)) +
                                         " request " + request.digest() + " (task \"" +
                                         request.task + "\")");
}

}  // namespace evoagent
