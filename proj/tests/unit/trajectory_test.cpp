#include <random>

#include <gtest/gtest.h>

#include "demo.hpp"
#include "evoagent/error.hpp"
#include "evoagent/trajectory.hpp"
#include "test_support.hpp"

using namespace evoagent;


TEST(Decompose, OneTriplePerActedStepInOrder) {
  std::mt19937_64 rng(500);
  for (int c = 0; c < 500; ++c) {
    const auto t = support::random_trajectory(rng, "r" + std::to_string(c));
    ASSERT_NO_THROW(check_chain(t));
    const auto triples = decompose(t);
    std::size_t expected = 0;
    for (const auto& s : t.steps) expected += s.acted_element.has_value();
    ASSERT_EQ(triples.size(), expected);
    std::size_t k = 0;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      if (!s.acted_element) continue;
      ASSERT_EQ(triples[k], (Triple{s.pre_page, *s.acted_element, s.invocation.kind, s.post_page, i}));
      ++k;
    }
    for (std::size_t j = 1; j < triples.size(); ++j) {
      ASSERT_LT(triples[j - 1].step_index, triples[j].step_index);
      if (triples[j].step_index == triples[j - 1].step_index + 1) ASSERT_EQ(triples[j - 1].target, triples[j].source);
    }
  }
}

TEST(Decompose, BrokenChainNamesTheStep) {
  std::mt19937_64 rng(1);
  Trajectory t;
  while (t.steps.size() < 3) t = support::random_trajectory(rng, "x");
  t.steps[2].pre_page = PageId{4242};
  try {
    check_chain(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::broken_chain);
    EXPECT_NE(std::string(e.what()).find("step 2 "), std::string::npos) << e.what();
  }
}

TEST(Persistence, DumpParseRoundTrip) {
  std::mt19937_64 rng(77);
  for (int c = 0; c < 200; ++c) {
    const auto t = support::random_trajectory(rng, "p" + std::to_string(c));
    ASSERT_EQ(parse_trajectory(dump_trajectory(t)), t);
  }
}

TEST(Persistence, TruncatedFileIsMalformed) {
  std::mt19937_64 rng(8);
  Trajectory t;
  while (t.steps.size() < 3) t = support::random_trajectory(rng, "trunc");
  const auto text = dump_trajectory(t);
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(
      {
        try {
          parse_trajectory(cut);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), Errc::malformed_record);
          throw;
        }
      },
      Error);
  try {
    parse_trajectory(text.substr(0, text.size() - 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::malformed_record);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
}

TEST(Persistence, DirectoryStore) {
  std::mt19937_64 rng(9);
  const auto dir = support::fresh_dir("trajectories");
  const auto b = support::random_trajectory(rng, "b");
  const auto a = support::random_trajectory(rng, "a");
  persist(b, dir);
  persist(a, dir);
  EXPECT_TRUE(std::filesystem::exists(trajectory_path(dir, "a")));
  EXPECT_EQ(load_trajectory(dir, "a"), a);
  EXPECT_EQ(load_all_trajectories(dir), (std::vector<Trajectory>{a, b}));
  try {
    load_trajectory(dir, "zzz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_id);
  }
}


TEST(Annotate, InteriorPagesOfALinearChainMergeTwoDescriptions) {
  support::Linear lin({0, 1, 2, 3});
  InstrumentedBackend probe(lin.backend);
  Reasoner reasoner(probe);
  const auto report = annotate(lin.traj, reasoner, lin.store);
  EXPECT_EQ(probe.count(RequestKind::describe_triple), 3u);
  EXPECT_EQ(probe.count(RequestKind::merge_descriptions), 4u);
  EXPECT_EQ(lin.inputs_of(0, report), 1u);
  EXPECT_EQ(lin.inputs_of(1, report), 2u);
  EXPECT_EQ(lin.inputs_of(2, report), 2u);
  EXPECT_EQ(lin.inputs_of(3, report), 1u);
  EXPECT_EQ(lin.store.page(lin.traj.steps[1].pre_page).description, "to; from");
}

TEST(Annotate, SingleStepAndRevisits) {
  support::Linear one({0, 1});
  Reasoner r1(one.backend);
  const auto rep1 = annotate(one.traj, r1, one.store);
  EXPECT_EQ(one.inputs_of(0, rep1), 1u);
  EXPECT_EQ(one.inputs_of(1, rep1), 1u);

  // p1 appears in four triple slots.
  support::Linear cyc({0, 1, 2, 1, 3});
  InstrumentedBackend probe(cyc.backend);
  Reasoner r2(probe);
  const auto rep2 = annotate(cyc.traj, r2, cyc.store);
  EXPECT_EQ(cyc.inputs_of(1, rep2), 4u);
  EXPECT_EQ(probe.count(RequestKind::merge_descriptions), 4u);
}

TEST(Annotate, DescribesEachTripleAndMergesEachPage) {
  support::Demo demo;
  const auto run = demo.run("search weather");
  ASSERT_EQ(run.trajectory.status, TrajectoryStatus::success);
  const auto triples = decompose(run.trajectory);
  std::set<PageId> pages;
  for (const auto& tr : triples) {
    pages.insert(tr.source);
    pages.insert(tr.target);
  }
  InstrumentedBackend probe(demo.backend);
  Reasoner reasoner(probe);
  const auto report = annotate(run.trajectory, reasoner, demo.store);
  EXPECT_EQ(report.describe_calls, triples.size());
  EXPECT_EQ(report.merge_calls, pages.size());
  EXPECT_EQ(probe.count(RequestKind::describe_triple), triples.size());
  EXPECT_EQ(probe.count(RequestKind::merge_descriptions), pages.size());
  EXPECT_EQ(report.usage, probe.total_usage());
  for (const auto p : pages) EXPECT_FALSE(demo.store.page(p).description.empty());
  for (const auto& tr : triples) EXPECT_FALSE(demo.store.element(tr.element).description.empty());
  EXPECT_TRUE(demo.store.check_integrity().empty());

  // A second pass folds the existing page text into each merge.
  const auto again = annotate(run.trajectory, reasoner, demo.store);
  for (const auto& p : again.pages) EXPECT_TRUE(p.included_existing);
}
