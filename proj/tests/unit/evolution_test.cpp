#include <random>

#include <gtest/gtest.h>

#include "demo.hpp"
#include "evoagent/evolution.hpp"
#include "test_support.hpp"

using namespace evoagent;

namespace {

std::vector<PatternStep> steps_of(std::initializer_list<int> tokens) {
  std::vector<PatternStep> out;
  for (int t : tokens) out.push_back(support::token_step(t));
  return out;
}

}  // namespace

// Tokens 0..3 are distinct (element, kind) pairs: 0=(1,tap) 1=(2,tap) 2=(1,long) 3=(2,long).
TEST(Miner, RepeatedTripleIsTheMaximalCandidate) {
  const auto t = support::trajectory_of_tokens("t", {0, 1, 2, 0, 1, 2});
  const auto got = mine_patterns({t}, 2, 2);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].steps, steps_of({0, 1, 2}));
  EXPECT_EQ(got[0].support, 2u);
  EXPECT_EQ(got[0].occurrences, (std::vector<Occurrence>{{"t", 0}, {"t", 3}}));
}

TEST(Miner, NoRepeatsMeansNothingAtSupportTwo) {
  EXPECT_TRUE(mine_patterns({support::trajectory_of_tokens("t", {0, 1, 2, 3})}, 2, 2).empty());
}

TEST(Miner, SupportOneYieldsTheWholeSequence) {
  const auto got = mine_patterns({support::trajectory_of_tokens("t", {0, 1, 2, 3})}, 2, 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].steps, steps_of({0, 1, 2, 3}));
}

TEST(Miner, OverlappingRunsCountGreedily) {
  // (A,A) in A,A,A counts once.
  const auto got = mine_patterns({support::trajectory_of_tokens("t", {0, 0, 0})}, 2, 2);
  EXPECT_TRUE(got.empty());
}

TEST(Miner, StepsWithoutElementsBreakPatterns) {
  auto t = support::trajectory_of_tokens("t", {0, 1, 0, 1});
  t.steps[1].acted_element.reset();
  t.steps[1].invocation = ActionInvocation::back();
  for (const auto& c : mine_patterns({t}, 2, 1)) {
    EXPECT_NE(c.steps, steps_of({0, 1, 0, 1}));
    EXPECT_NE(c.occurrences.front().start, 0u);
  }
}

TEST(Miner, AgreesWithBruteForce) {
  std::mt19937_64 rng(300);
  for (int c = 0; c < 300; ++c) {
    std::uniform_int_distribution<int> ntraj(1, 5), len(0, 8), alpha(1, 4);
    const int alphabet = alpha(rng);
    std::uniform_int_distribution<int> tok(0, alphabet - 1);
    std::vector<std::vector<int>> seqs(static_cast<std::size_t>(ntraj(rng)));
    for (auto& s : seqs) {
      s.resize(static_cast<std::size_t>(len(rng)));
      for (auto& t : s) t = tok(rng);
    }
    std::uniform_int_distribution<std::size_t> ml(2, 3), ms(1, 3);
    const auto min_len = ml(rng);
    const auto min_support = ms(rng);
    const auto why = support::miner_disagreement(seqs, min_len, min_support, alphabet);
    ASSERT_TRUE(why.empty()) << "case " << c << ": " << why;
  }
}

TEST(Evolve, DemoSearchGrowsTheSpaceByOne) {
  support::Demo demo;
  auto basic = demo.run("search weather");
  Reasoner reasoner(demo.backend);
  annotate(basic.trajectory, reasoner, demo.store);
  const ActionSpace before = action_space_from_store(demo.store);
  const auto report = evolve("search weather", basic.trajectory, reasoner, demo.store, before, {});
  EXPECT_EQ(report.outcome, "evolved");
  ASSERT_EQ(report.created.size(), 1u);
  EXPECT_EQ(before.high_level().size(), 0u);
  EXPECT_EQ(report.space.high_level().size(), 1u);
  const auto hla = demo.store.high_level_action(report.created[0]);
  EXPECT_EQ(hla.name, "search");
  EXPECT_EQ(hla.parameters(), (std::vector<std::string>{"query"}));

  // The shortcut's element sequence is a verbatim slice of the source trajectory.
  const auto& steps = basic.trajectory.steps;
  bool found = false;
  for (std::size_t s = 0; s + hla.steps.size() <= steps.size() && !found; ++s) {
    bool all = true;
    for (std::size_t k = 0; k < hla.steps.size(); ++k) {
      all = all && steps[s + k].acted_element == hla.steps[k].element && steps[s + k].invocation.kind == hla.steps[k].kind;
    }
    found = all;
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(hla.source_trajectory_ids, (std::vector<std::string>{basic.trajectory.id}));
}

TEST(Evolve, GatedWhenNotRepetitive) {
  support::Demo demo;
  auto basic = demo.run("open dark mode");
  ASSERT_EQ(basic.trajectory.status, TrajectoryStatus::success);
  Reasoner reasoner(demo.backend);
  const auto report = evolve("open dark mode", basic.trajectory, reasoner, demo.store, {}, {});
  EXPECT_EQ(report.outcome, "gated");
  EXPECT_TRUE(report.created.empty());
  EXPECT_EQ(reasoner.calls(RequestKind::synthesize_shortcut), 0u);
}

TEST(Evolve, IdempotentAndMonotone) {
  support::Demo demo;
  const auto first = demo.learn();
  ASSERT_EQ(first.created.size(), 1u);
  Reasoner reasoner(demo.backend);
  // Same element sequence as the learned shortcut: deduplicated before synthesis.
  auto basic = demo.run("search weather");
  const auto second = evolve("search weather", basic.trajectory, reasoner, demo.store, first.space, {});
  EXPECT_TRUE(second.created.empty());
  ASSERT_EQ(second.skipped.size(), 1u);
  EXPECT_EQ(second.skipped[0].reason, "skipped: duplicate");
  EXPECT_EQ(reasoner.calls(RequestKind::synthesize_shortcut), 0u);
  for (const auto& [id, a] : first.space.high_level()) EXPECT_TRUE(second.space.contains(id));
  EXPECT_EQ(demo.store.shortcuts().size(), 1u);
}

TEST(Evolve, FailedTrajectoriesAreSkipped) {
  support::Demo demo;
  auto t = support::trajectory_of_tokens("f", {0, 1});
  t.status = TrajectoryStatus::fail;
  Reasoner reasoner(demo.backend);
  const auto report = evolve("x", t, reasoner, demo.store, {}, {});
  EXPECT_EQ(report.outcome.rfind("skipped:", 0), 0u);
  EXPECT_EQ(reasoner.total_usage(), ReasonerUsage{});
}

TEST(Evolve, CrossTrajectoryDefaultsToSupportTwo) {
  EvolutionConfig cfg;
  EXPECT_EQ(cfg.effective_min_support(), 1u);
  cfg.cross_trajectory = true;
  EXPECT_EQ(cfg.effective_min_support(), 2u);
  cfg.min_support = 3;
  EXPECT_EQ(cfg.effective_min_support(), 3u);
}
