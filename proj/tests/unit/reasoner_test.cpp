#include <atomic>
#include <cstdio>
#include <thread>

#include <gtest/gtest.h>

#include "httplib.h"

#include "evoagent/error.hpp"
#include "evoagent/reasoner.hpp"
#include "evoagent/remote_reasoner.hpp"
#include "evoagent/scripted_reasoner.hpp"
#include "evoagent/serialization.hpp"
#include "test_support.hpp"

using namespace evoagent;
using nlohmann::json;

namespace {

ScreenObservation search_screen() {
  ScreenObservation obs;
  for (const char* d : {"bar:search", "icon:mic"}) {
    DetectedElement e;
    e.index = obs.elements.size();
    e.visual_descriptor = d;
    e.ocr_text = d == std::string("bar:search") ? "Search" : "";
    obs.elements.push_back(e);
  }
  return obs;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::io;
}

// Plain FNV-1a 64, written out again here.
std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScriptedBackend backend_of(const char* fixtures) { return ScriptedBackend::from_json(json::parse(fixtures)); }

}  // namespace

TEST(Request, DigestIsFnvOfCanonicalDump) {
  ReasonerRequest r{RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}};
  EXPECT_EQ(canonical_dump(r.canonical()), R"({"kind":"judge_repetitive","payload":{"steps":[]},"task":"t"})");
  EXPECT_EQ(r.digest(), fnv_hex(canonical_dump(r.canonical())));
  EXPECT_EQ(r.digest().size(), 16u);
}

TEST(Request, ShapeIsCheckedBeforeDispatch) {
  auto backend = backend_of("[]");
  Reasoner reasoner(backend);
  EXPECT_EQ(code_of([&] { reasoner.request({RequestKind::plan_next, "t", json::object()}); }), Errc::payload_shape);
  EXPECT_EQ(reasoner.calls(RequestKind::plan_next), 0u);
}

TEST(Scripted, FirstMatchingFixtureWins) {
  auto backend = backend_of(R"([
    {"kind":"plan_next","match":{"task":"other"},"response":{"decision":"fail","reason":"x"}},
    {"kind":"plan_next","match":{"visible":["bar:search"],"absent":["btn:go"],"last_action":"none"},
     "response":{"decision":"act","action":{"kind":"tap","target":"bar:search"}}},
    {"kind":"plan_next","match":{},"response":{"decision":"finish","summary":"done"}}])");
  Reasoner reasoner(backend);
  const auto out = reasoner.plan_next("search weather", search_screen(), {});
  const auto* act = std::get_if<PlanAct>(&out.value);
  ASSERT_NE(act, nullptr);
  EXPECT_EQ(act->invocation, ActionInvocation::tap(DetectedIndex{0}));
  EXPECT_FALSE(act->completes_task);

  const auto later = reasoner.plan_next("search weather", search_screen(), {{BasicActionKind::tap, "bar:search", {}}});
  EXPECT_TRUE(std::holds_alternative<PlanFinish>(later.value));
  EXPECT_EQ(reasoner.calls(RequestKind::plan_next), 2u);
}

TEST(Scripted, TokenProxyUsage) {
  EXPECT_EQ(token_proxy(0), 0);
  EXPECT_EQ(token_proxy(1), 1);
  EXPECT_EQ(token_proxy(8), 2);
  EXPECT_EQ(token_proxy(9), 3);
  auto backend = backend_of(R"([{"kind":"judge_repetitive","response":{"repetitive":true}}])");
  ReasonerRequest r{RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}};
  const auto resp = backend.complete(r);
  EXPECT_EQ(resp.usage.prompt_tokens, token_proxy(canonical_dump(r.canonical()).size()));
  EXPECT_EQ(resp.usage.completion_tokens, token_proxy(std::string(R"({"repetitive":true})").size()));
}

TEST(Scripted, DigestMatcherAndExplicitUsage) {
  ReasonerRequest r{RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}};
  auto backend = ScriptedBackend::from_json(json::array(
      {json{{"kind", "judge_repetitive"}, {"match", {{"digest", r.digest()}}},
            {"response", {{"repetitive", false}}}, {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}}}));
  EXPECT_EQ(backend.complete(r).usage, (ReasonerUsage{7, 3}));
  r.task = "u";
  EXPECT_EQ(code_of([&] { backend.complete(r); }), Errc::missing_fixture);
}

TEST(Scripted, MissingFixtureNamesKindAndDigest) {
  auto backend = backend_of("[]");
  ReasonerRequest r{RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}};
  try {
    backend.complete(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_fixture);
    EXPECT_NE(std::string(e.what()).find("judge_repetitive"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(r.digest()), std::string::npos);
  }
}

TEST(Scripted, MergeFallbackDedupes) {
  auto backend = backend_of("[]");
  Reasoner reasoner(backend);
  EXPECT_EQ(reasoner.merge_page_descriptions({"a", "b", "a"}, "t", PageId{3}).value, "a; b");
  EXPECT_EQ(code_of([&] { reasoner.merge_page_descriptions({}, "t", PageId{3}); }), Errc::empty_list);
}

TEST(Scripted, BadFixtureFilesAreParseErrors) {
  EXPECT_EQ(code_of([] { backend_of(R"([{"kind":"plan_next","match":{"colour":1},"response":{}}])"); }), Errc::parse);
  EXPECT_EQ(code_of([] { backend_of(R"([{"kind":"nope","response":{}}])"); }), Errc::parse);
  EXPECT_EQ(code_of([] { ScriptedBackend::from_file("/nonexistent/fixtures.json"); }), Errc::io);
}

TEST(Replies, MalformedPlanRepliesAreParseErrors) {
  for (const char* reply : {R"({"decision":"dance"})", R"({"decision":"act","action":{"kind":"tap","target":9}})",
                            R"({"decision":"act","action":{"kind":"tap"}})",
                            R"({"decision":"act","action":{"kind":"swipe","direction":"sideways"}})",
                            R"({"decision":"act","action":{"kind":"text","target":0,"text":5}})",
                            R"({"decision":"act","action":{"kind":"back"},"completes_task":"yes"})", R"([])"}) {
    auto backend = ScriptedBackend::from_json(json::array({json{{"kind", "plan_next"}, {"response", json::parse(reply)}}}));
    Reasoner reasoner(backend);
    EXPECT_EQ(code_of([&] { reasoner.plan_next("t", search_screen(), {}); }), Errc::parse) << reply;
  }
}

TEST(Replies, SynthesizeNeedsTwoStepsAndMatchingTemplates) {
  auto backend = backend_of(R"([{"kind":"synthesize_shortcut","response":{"name":"s","templates":[""]}}])");
  Reasoner reasoner(backend);
  std::vector<SliceStep> one(1);
  EXPECT_EQ(code_of([&] { reasoner.synthesize_shortcut("t", one); }), Errc::slice_too_short);
  std::vector<SliceStep> two(2);
  two[0].element = ElementId{1};
  two[1].element = ElementId{2};
  EXPECT_EQ(code_of([&] { reasoner.synthesize_shortcut("t", two); }), Errc::parse);
}

TEST(Replies, ApplicabilityWithoutAllBindingsIsNotApplicable) {
  auto backend = backend_of(R"([{"kind":"check_applicable","response":{"applicable":true,"bindings":{}}}])");
  Reasoner reasoner(backend);
  ShortcutContext ctx;
  ctx.action.id = ShortcutId{9};
  ctx.action.name = "search";
  ctx.action.steps = {{ElementId{1}, BasicActionKind::text, "{query}", {}}};
  const auto out = reasoner.check_applicable("t", ctx, search_screen());
  EXPECT_FALSE(out.value.applicable);
  EXPECT_EQ(out.value.reason, "incomplete bindings");
}

TEST(Instrumentation, CountsEveryCall) {
  auto inner = backend_of(R"([{"kind":"judge_repetitive","response":{"repetitive":true}}])");
  InstrumentedBackend probe(inner);
  Reasoner reasoner(probe);
  reasoner.judge_repetitive("t", {});
  reasoner.merge_page_descriptions({"a"}, "t", PageId{1});
  EXPECT_EQ(probe.log().size(), 2u);
  EXPECT_EQ(probe.count(RequestKind::judge_repetitive), 1u);
  EXPECT_EQ(probe.total_usage(), reasoner.total_usage());
}

TEST(Latency, ChargedToTheClockDeterministically) {
  auto inner = backend_of(R"([{"kind":"judge_repetitive","response":{"repetitive":true}}])");
  auto run = [&](std::uint64_t seed) {
    ManualClock clock(0);
    SimulatedLatencyBackend slow(inner, clock, LatencyModel{500, 2, 0.1, seed});
    std::vector<std::int64_t> marks;
    for (int i = 0; i < 5; ++i) {
      const auto resp = slow.complete({RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}});
      marks.push_back(clock.now_ms());
      const double nominal = 500.0 + 2.0 * static_cast<double>(resp.usage.total());
      const auto spent = marks.back() - (i ? marks[static_cast<std::size_t>(i) - 1] : 0);
      EXPECT_GE(static_cast<double>(spent), nominal * 0.9 - 1);
      EXPECT_LE(static_cast<double>(spent), nominal * 1.1 + 1);
    }
    return marks;
  };
  EXPECT_EQ(run(1), run(1));
}

TEST(Chat, RequestShape) {
  ReasonerRequest r{RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}};
  const auto body = build_chat_request(r, "m");
  EXPECT_EQ(body.at("model"), "m");
  EXPECT_EQ(body.at("temperature"), 0);
  ASSERT_EQ(body.at("messages").size(), 2u);
  EXPECT_EQ(body.at("messages")[1].at("content"), canonical_dump(r.canonical()));
  EXPECT_NE(body.at("messages")[0].at("content").get<std::string>().find("repetitive"), std::string::npos);
}

TEST(Chat, ResponseParsingToleratesFences) {
  const json raw{{"choices", json::array({json{{"message", {{"content", "```json\n{\"repetitive\":true}\n```"}}}}})},
                 {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 2}}}};
  const auto out = parse_chat_response(raw);
  EXPECT_EQ(out.body, json({{"repetitive", true}}));
  EXPECT_EQ(out.usage, (ReasonerUsage{10, 2}));
  EXPECT_EQ(code_of([] { parse_chat_response(json::object()); }), Errc::parse);
  const json not_json{{"choices", json::array({json{{"message", {{"content", "sure!"}}}}})}};
  EXPECT_EQ(code_of([&] { parse_chat_response(not_json); }), Errc::parse);
}

TEST(Remote, RetriesOnceThenRecordsAndReplays) {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    EXPECT_EQ(req.get_header_value("Authorization"), "Bearer k");
    const json reply{{"choices", json::array({json{{"message", {{"content", R"({"repetitive":false})"}}}}})},
                     {"usage", {{"prompt_tokens", 4}, {"completion_tokens", 1}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const auto dir = support::fresh_dir("remote");
  const auto transcript = dir / "t.jsonl";
  ReasonerRequest r{RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}};
  {
    RemoteBackend remote(RemoteConfig{"http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "k", "m", transcript, 5});
    const auto out = remote.complete(r);
    EXPECT_EQ(out.body, json({{"repetitive", false}}));
    EXPECT_EQ(out.usage, (ReasonerUsage{4, 1}));
  }
  EXPECT_EQ(hits.load(), 2);
  server.stop();
  worker.join();

  ReplayBackend replay(transcript);
  EXPECT_EQ(replay.remaining(), 1u);
  EXPECT_EQ(replay.complete(r).body, json({{"repetitive", false}}));
  EXPECT_EQ(code_of([&] { replay.complete(r); }), Errc::missing_fixture);

  ReplayBackend diverged(transcript);
  r.task = "changed";
  EXPECT_EQ(code_of([&] { diverged.complete(r); }), Errc::missing_fixture);
}

TEST(Remote, TransportFailureAfterRetry) {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  RemoteBackend remote(RemoteConfig{"http://127.0.0.1:" + std::to_string(port) + "/x", "", "m", std::nullopt, 2});
  EXPECT_EQ(code_of([&] { remote.complete({RequestKind::judge_repetitive, "t", json{{"steps", json::array()}}}); }),
            Errc::transport);
}
