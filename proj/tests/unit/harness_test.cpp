#include <gtest/gtest.h>

#include "demo.hpp"
#include "evoagent/error.hpp"
#include "evoagent/harness.hpp"

using namespace evoagent;
using nlohmann::json;

namespace {

struct Bench {
  BenchmarkSuite suite = load_suite(support::asset("assets/demo_search/demo_search.suite.json"));
  AppModel app = load_app(suite.app);
  ScriptedBackend backend = ScriptedBackend::from_file(suite.fixtures);

  SuiteRun run(SpaceVariant space, ReasonerBackend* through = nullptr) {
    SuiteConfig cfg;
    cfg.space = space;
    cfg.seed = 7;
    return run_suite(suite, app, through ? *through : backend, cfg);
  }
};

}  // namespace

TEST(Suite, LoadsAndValidates) {
  Bench b;
  EXPECT_EQ(b.suite.name, "demo-search");
  EXPECT_EQ(b.suite.repeats, 5u);
  EXPECT_EQ(b.suite.tasks.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(b.suite.app));

  auto doc = json::parse(support::slurp(support::asset("assets/demo_search/demo_search.suite.json")));
  doc["repeats"] = 0;
  EXPECT_THROW(parse_suite(doc), ValidationError);
  doc["repeats"] = 1;
  doc["tasks"] = json::array();
  EXPECT_THROW(parse_suite(doc), ValidationError);
}

TEST(Suite, BasicRunOfTheDemo) {
  Bench b;
  const auto run = b.run(SpaceVariant::basic);
  EXPECT_DOUBLE_EQ(run.summary.success_rate, 1.0);
  EXPECT_EQ(run.reports.size(), 15u);
  ASSERT_EQ(run.summary.tasks.size(), 3u);
  EXPECT_DOUBLE_EQ(run.summary.tasks[0].avg_steps, 3.0);
  EXPECT_DOUBLE_EQ(run.summary.tasks[1].avg_steps, 3.0);
  EXPECT_DOUBLE_EQ(run.summary.tasks[2].avg_steps, 2.0);
  EXPECT_EQ(run.summary.preparation_usage, ReasonerUsage{});
}

TEST(Suite, EvolvedRunSkipsPlanningOnCoveredTasks) {
  Bench b;
  const auto basic = b.run(SpaceVariant::basic);
  const auto evolved = b.run(SpaceVariant::evolved);
  EXPECT_DOUBLE_EQ(evolved.summary.success_rate, 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& t = evolved.summary.tasks[i];
    EXPECT_DOUBLE_EQ(t.avg_calls.count(RequestKind::plan_next) ? t.avg_calls.at(RequestKind::plan_next) : 0.0, 0.0) << t.task;
    EXPECT_LT(t.avg_tokens, basic.summary.tasks[i].avg_tokens);
  }
  EXPECT_LT(evolved.summary.avg_tokens, basic.summary.avg_tokens);
  EXPECT_GT(evolved.summary.preparation_usage.total(), 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(evolved.summary.tasks[i].avg_steps, basic.summary.tasks[i].avg_steps);
}

TEST(Suite, TokenTotalsAreConserved) {
  Bench b;
  for (auto space : {SpaceVariant::basic, SpaceVariant::evolved}) {
    InstrumentedBackend probe(b.backend);
    const auto run = b.run(space, &probe);
    ReasonerUsage reports;
    for (const auto& r : run.reports) reports += r.usage_total;
    EXPECT_EQ(run.summary.total_usage, reports);
    EXPECT_EQ(run.summary.total_usage + run.summary.preparation_usage, probe.total_usage());
    ReasonerUsage per_task;
    for (const auto& t : run.summary.tasks) per_task += t.total_usage;
    EXPECT_EQ(per_task, run.summary.total_usage);
    std::size_t calls = 0;
    for (const auto& [k, n] : run.summary.calls) calls += n;
    // Evaluation calls are the log minus whatever preparation spent.
    EXPECT_LE(calls, probe.log().size());
    EXPECT_EQ(calls == probe.log().size(), space == SpaceVariant::basic);
  }
}

TEST(Suite, SummaryJsonRoundTrip) {
  Bench b;
  const auto run = b.run(SpaceVariant::evolved);
  const auto j = to_json_value(run.summary);
  EXPECT_EQ(to_json_value(summary_from_json(j)), j);
  EXPECT_NE(summary_table(run.summary).find("search weather"), std::string::npos);
}

TEST(Suite, OutputsAreByteIdentical) {
  auto write = [](const std::string& name) {
    Bench b;
    const auto dir = support::fresh_dir(name);
    write_suite_outputs(b.run(SpaceVariant::evolved), dir);
    std::map<std::string, std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files[std::filesystem::relative(e.path(), dir).string()] = support::slurp(e.path());
    }
    return files;
  };
  const auto a = write("bench-a");
  const auto b = write("bench-b");
  EXPECT_TRUE(a.contains("summary.json"));
  EXPECT_TRUE(a.contains("store.graph.jsonl"));
  EXPECT_EQ(a, b);
}

TEST(Compare, EvolvedAgainstBasic) {
  Bench b;
  const auto basic = b.run(SpaceVariant::basic).summary;
  const auto evolved = b.run(SpaceVariant::evolved).summary;
  const auto c = compare_runs(basic, evolved);
  EXPECT_EQ(c.at("jointly_successful"), 3);
  for (const auto& t : c.at("tasks")) {
    EXPECT_LE(t.at("avg_steps").at("b").get<double>(), t.at("avg_steps").at("a").get<double>());
    EXPECT_EQ(t.at("length_class"), "short");
  }
  EXPECT_TRUE(c.at("t_tests").at("tokens").contains("one_tailed_p"));
  EXPECT_FALSE(comparison_table(c).empty());
}

TEST(Compare, IdenticalSummariesShowNoDifference) {
  Bench b;
  const auto s = b.run(SpaceVariant::basic).summary;
  const auto c = compare_runs(s, s);
  for (const auto& t : c.at("tasks")) EXPECT_DOUBLE_EQ(t.at("avg_steps").at("delta").get<double>(), 0.0);
  EXPECT_EQ(c.at("t_tests").at("steps").at("result"), "no difference");
  EXPECT_EQ(c.at("t_tests").at("task_time_ms").at("result"), "no difference");
}

TEST(Compare, MismatchedSuites) {
  Bench b;
  auto s = b.run(SpaceVariant::basic).summary;
  auto other = s;
  other.suite = "another";
  try {
    compare_runs(s, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::suite_mismatch);
  }
  other = s;
  other.tasks.pop_back();
  EXPECT_THROW(compare_runs(s, other), Error);
}

TEST(Compare, LengthClasses) {
  EXPECT_EQ(length_class(5), "short");
  EXPECT_EQ(length_class(6), "medium");
  EXPECT_EQ(length_class(10), "medium");
  EXPECT_EQ(length_class(11), "long");
  EXPECT_EQ(length_class(std::nullopt), "unclassed");
}

TEST(Summarize, AveragesOverSuccessfulRuns) {
  Bench b;
  BenchmarkSuite one = b.suite;
  one.tasks.resize(1);
  TaskReport ok, bad;
  ok.task = bad.task = one.tasks[0].task;
  ok.status = TrajectoryStatus::success;
  ok.steps_executed = 3;
  ok.usage_total = {100, 20};
  bad.status = TrajectoryStatus::fail;
  bad.steps_executed = 9;
  bad.usage_total = {500, 50};
  const auto s = summarize(one, {ok, bad}, 2);
  EXPECT_DOUBLE_EQ(s.success_rate, 0.5);
  EXPECT_DOUBLE_EQ(s.tasks[0].avg_steps, 3.0);
  EXPECT_DOUBLE_EQ(s.tasks[0].avg_tokens, 120.0);
  EXPECT_EQ(s.total_usage, (ReasonerUsage{600, 70}));
}
