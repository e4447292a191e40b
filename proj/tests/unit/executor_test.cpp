#include <gtest/gtest.h>

#include "demo.hpp"
#include "evoagent/error.hpp"
#include "evoagent/executor.hpp"
#include "evoagent/serialization.hpp"

using namespace evoagent;
using nlohmann::json;

namespace {

std::size_t shortcut_steps(const Trajectory& t) {
  std::size_t n = 0;
  for (const auto& s : t.steps) n += s.from_shortcut();
  return n;
}

}  // namespace

TEST(Prioritize, OrderThenLengthThenNewestId) {
  const ShortcutCandidate s1{ShortcutId{1}, 1, 2}, s2{ShortcutId{2}, 2, 5};
  EXPECT_EQ(prioritize({s2, s1}), (std::vector<ShortcutCandidate>{s1, s2}));
  const ShortcutCandidate a{ShortcutId{3}, 1, 3}, b{ShortcutId{4}, 1, 2};
  EXPECT_EQ(prioritize({b, a}), (std::vector<ShortcutCandidate>{a, b}));
  const ShortcutCandidate c{ShortcutId{5}, 1, 3};
  EXPECT_EQ(prioritize({a, c}), (std::vector<ShortcutCandidate>{c, a}));
  EXPECT_TRUE(prioritize({}).empty());
}

TEST(RunTask, BasicSpaceTakesThreePlannedSteps) {
  support::Demo demo;
  const auto run = demo.run("search weather");
  EXPECT_EQ(run.report.status, TrajectoryStatus::success);
  EXPECT_EQ(run.report.steps_executed, 3u);
  EXPECT_EQ(run.report.calls(RequestKind::plan_next), 3u);
  EXPECT_EQ(run.report.shortcut_invocations, 0u);
  EXPECT_TRUE(run.report.fallback_events.empty());
  EXPECT_EQ(run.trajectory.steps.size(), 3u);
  EXPECT_NO_THROW(check_chain(run.trajectory));
}

TEST(RunTask, EvolvedSpaceRunsTheShortcut) {
  support::Demo demo;
  const auto basic = demo.run("search weather");
  const auto learned = demo.learn();
  ASSERT_EQ(learned.created.size(), 1u);
  const auto run = demo.run("search weather", learned.space);
  EXPECT_EQ(run.report.status, TrajectoryStatus::success);
  EXPECT_EQ(run.report.steps_executed, 3u);
  EXPECT_EQ(shortcut_steps(run.trajectory), 3u);
  EXPECT_EQ(run.report.calls(RequestKind::plan_next), 0u);
  EXPECT_EQ(run.report.calls(RequestKind::check_applicable), 1u);
  EXPECT_EQ(run.report.shortcut_invocations, 1u);
  EXPECT_LT(run.report.usage_total.total(), basic.report.usage_total.total());
  // The other search task reuses the same shortcut with a new binding.
  const auto news = demo.run("search news", learned.space);
  EXPECT_EQ(news.report.calls(RequestKind::plan_next), 0u);
  EXPECT_EQ(news.trajectory.steps[1].invocation.text_payload, std::optional<std::string>("news"));
}

TEST(RunTask, StepCapAborts) {
  support::Demo demo;
  ExecutorConfig cfg;
  cfg.max_steps = 1;
  const auto run = demo.run("search weather", {}, {}, cfg);
  EXPECT_EQ(run.report.status, TrajectoryStatus::aborted);
  EXPECT_EQ(run.report.steps_executed, 1u);
  cfg.max_steps = 0;
  EXPECT_THROW(demo.run("search weather", {}, {}, cfg), Error);
}

class FaultedShortcut : public ::testing::TestWithParam<const char*> {};

TEST_P(FaultedShortcut, FallsBackOnceAndSucceeds) {
  support::Demo demo;
  const auto learned = demo.learn();
  const auto run = demo.run("search weather", learned.space, support::demo_faults(GetParam()));
  EXPECT_EQ(run.report.status, TrajectoryStatus::success) << run.report.detail;
  ASSERT_EQ(run.report.fallback_events.size(), 1u);
  EXPECT_NE(run.report.fallback_events[0].reason.find("aborted"), std::string::npos)
      << run.report.fallback_events[0].reason;
  EXPECT_GT(run.report.calls(RequestKind::plan_next), 0u);
  EXPECT_NO_THROW(check_chain(run.trajectory));
}

INSTANTIATE_TEST_SUITE_P(Demo, FaultedShortcut, ::testing::Values("remove", "relocate", "deadend"));

TEST(ExecuteTemplate, RelocatedSecondElementIsUnresolved) {
  support::Demo demo;
  const auto learned = demo.learn();
  const auto hla = demo.store.high_level_action(learned.created[0]);
  SimDevice device(demo.app, support::demo_faults("relocate"), demo.clock);
  const auto obs = device.observe();
  const auto page = demo.store.upsert_page(obs);
  const auto tmpl = make_template(hla, {{"query", "weather"}}, demo.store);
  ASSERT_EQ(tmpl.invocations.size(), 3u);
  const auto result = execute_template(tmpl, device, demo.store, obs, page);
  ASSERT_TRUE(result.abort.has_value());
  EXPECT_EQ(result.abort->step_index, 1u);
  EXPECT_EQ(result.abort->reason, "element unresolved");
  EXPECT_EQ(result.steps.size(), 1u);
}

TEST(ExecuteTemplate, DivergingTransitionIsAnUnexpectedPage) {
  support::Demo demo;
  const auto learned = demo.learn();
  const auto hla = demo.store.high_level_action(learned.created[0]);

  // Same controls as the search page, plus enough clutter to break the fingerprint.
  auto app = demo.app;
  auto alt = app.pages.at("search");
  for (int i = 0; i < 3; ++i) {
    AppElement e;
    e.local_id = "promo" + std::to_string(i);
    e.role_hint = "card";
    e.visual_descriptor = "card:promo" + std::to_string(i);
    e.bbox = {0.05, 0.3 + 0.1 * i, 0.95, 0.38 + 0.1 * i};
    alt.elements.push_back(e);
  }
  app.pages["search_alt"] = alt;
  for (auto& t : app.transitions) {
    if (t.page == "home" && t.element == "search_box") t.target_page = "search_alt";
  }
  app.text_fields.insert({"search_alt", "search_input"});
  ASSERT_TRUE(validate_app(app).empty());

  SimDevice device(app, {}, demo.clock);
  const auto obs = device.observe();
  const auto page = demo.store.upsert_page(obs);
  const auto result = execute_template(make_template(hla, {{"query", "weather"}}, demo.store), device, demo.store, obs, page);
  ASSERT_TRUE(result.abort.has_value());
  EXPECT_EQ(result.abort->step_index, 1u);
  EXPECT_EQ(result.abort->reason, "unexpected page");
  EXPECT_EQ(device.current_page(), "search_alt");
}

TEST(ExecuteTemplate, ExpectedTargetsComeFromUniqueLeadsTo) {
  support::Demo demo;
  const auto learned = demo.learn();
  const auto tmpl = make_template(demo.store.high_level_action(learned.created[0]), {{"query", "q"}}, demo.store);
  ASSERT_EQ(tmpl.expected_targets.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto targets = demo.store.leads_to(tmpl.steps[i].element);
    EXPECT_EQ(tmpl.expected_targets[i].has_value(), targets.size() == 1) << i;
  }
  EXPECT_THROW(make_template(demo.store.high_level_action(learned.created[0]), {}, demo.store), Error);
}

TEST(RunTask, DeviceErrorsFallBackThenFail) {
  support::Demo demo;
  demo.backend = ScriptedBackend::from_json(json::parse(
      R"([{"kind":"plan_next","response":{"decision":"act","action":{"kind":"text","target":"bar:search","text":"x"}}}])"));
  const auto run = demo.run("type into a button");
  EXPECT_EQ(run.report.status, TrajectoryStatus::fail);
  EXPECT_EQ(run.report.fallback_events.size(), 2u);
  EXPECT_EQ(run.report.steps_executed, 0u);
  EXPECT_EQ(run.report.unattributed_usage, run.report.usage_total);
  EXPECT_GT(run.report.usage_total.total(), 0);
}

TEST(RunTask, UnusablePlansFallBackThenFail) {
  support::Demo demo;
  demo.backend = ScriptedBackend::from_json(json::parse(
      R"([{"kind":"plan_next","response":{"decision":"act","action":{"kind":"tap","target":"btn:nowhere"}}}])"));
  const auto run = demo.run("search weather");
  EXPECT_EQ(run.report.status, TrajectoryStatus::fail);
  EXPECT_EQ(run.report.fallback_events.size(), 2u);
}

TEST(RunTask, ReasonerFailAndFinishDecisions) {
  support::Demo demo;
  demo.backend = ScriptedBackend::from_json(json::parse(
      R"([{"kind":"plan_next","match":{"task":"give up"},"response":{"decision":"fail","reason":"cannot"}},
          {"kind":"plan_next","response":{"decision":"finish","summary":"nothing to do"}}])"));
  EXPECT_EQ(demo.run("give up").report.status, TrajectoryStatus::fail);
  const auto done = demo.run("already done");
  EXPECT_EQ(done.report.status, TrajectoryStatus::success);
  EXPECT_EQ(done.report.steps_executed, 0u);
}

TEST(RunTask, ReportTotalsAreConserved) {
  support::Demo demo;
  const auto learned = demo.learn();
  for (const char* fault : {"", "remove", "relocate", "deadend"}) {
    InstrumentedBackend probe(demo.backend);
    Reasoner reasoner(probe);
    SimDevice device(demo.app, *fault ? support::demo_faults(fault) : std::vector<Fault>{}, demo.clock);
    const auto run = run_task("search weather", device, reasoner, demo.store, learned.space);
    EXPECT_EQ(run.report.steps_executed, run.trajectory.steps.size());
    ReasonerUsage sum = run.report.unattributed_usage;
    for (const auto& s : run.trajectory.steps) sum += s.usage;
    EXPECT_EQ(run.report.usage_total, sum);
    EXPECT_EQ(run.report.usage_total, probe.total_usage());
    for (auto kind : kRequestKinds) EXPECT_EQ(run.report.calls(kind), probe.count(kind)) << fault;
    std::int64_t t = 0;
    for (auto ms : run.report.step_times_ms) t += ms;
    EXPECT_LE(t, run.report.wall_time_ms);
  }
}

TEST(RunTask, IdenticalSetupsGiveIdenticalReports) {
  auto once = [] {
    support::Demo demo;
    const auto learned = demo.learn();
    const auto run = demo.run("search weather", learned.space, support::demo_faults("relocate"));
    return canonical_dump(to_json_value(run.report)) + dump_trajectory(run.trajectory) + demo.store.export_graph();
  };
  EXPECT_EQ(once(), once());
}

TEST(TaskReportJson, RoundTrip) {
  support::Demo demo;
  const auto run = demo.run("search weather");
  const auto j = to_json_value(run.report);
  EXPECT_EQ(to_json_value(task_report_from_json(j)), j);
}
