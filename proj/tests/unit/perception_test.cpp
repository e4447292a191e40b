#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "evoagent/embedding.hpp"
#include "evoagent/error.hpp"
#include "evoagent/observation.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace evoagent;

TEST(Embedding, MatchesThePythonOracle) {
  const auto golden = nlohmann::json::parse(support::slurp(support::asset("tests/data/golden_embeddings.json")));
  ReferenceEmbedder embedder;
  ASSERT_EQ(embedder.dimension(), golden.at("dimension").get<std::size_t>());
  for (const auto& v : golden.at("vectors")) {
    const auto e = embedder.embed(v.at("descriptor").get<std::string>());
    const auto first8 = v.at("first8").get<std::vector<double>>();
    for (std::size_t k = 0; k < first8.size(); ++k) {
      EXPECT_NEAR(e.values()[k], first8[k], 1e-9) << v.at("descriptor") << " component " << k;
    }
  }
  for (const auto& p : golden.at("pairs")) {
    const double c = cosine(embedder.embed(p.at("a").get<std::string>()), embedder.embed(p.at("b").get<std::string>()));
    EXPECT_NEAR(c, p.at("cosine").get<double>(), 1e-9);
  }
}

TEST(Embedding, UnitNormAndDeterministic) {
  ReferenceEmbedder embedder;
  for (const auto& d : support::descriptor_pool()) {
    const auto a = embedder.embed(d);
    EXPECT_TRUE(a.is_unit());
    EXPECT_EQ(a, embedder.embed(d));
    EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
  }
}

TEST(Embedding, Errors) {
  ReferenceEmbedder embedder;
  try {
    embedder.embed("");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_descriptor);
  }
  try {
    cosine(embedder.embed("a"), ReferenceEmbedder(8).embed("a"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(Embedding, QuantizeIsStableUnderTextRoundTrip) {
  ReferenceEmbedder embedder;
  const auto q = quantize(embedder.embed("btn:go"));
  nlohmann::json j = std::vector<double>(q.values().begin(), q.values().end());
  const auto back = nlohmann::json::parse(j.dump()).get<std::vector<double>>();
  EXPECT_EQ(Embedding(back), q);
  EXPECT_EQ(quantize(q), q);
}

TEST(Fingerprint, SortedMultiset) {
  ScreenObservation obs;
  for (const char* d : {"b", "a", "b"}) {
    DetectedElement e;
    e.index = obs.elements.size();
    e.visual_descriptor = d;
    obs.elements.push_back(e);
  }
  EXPECT_EQ(page_fingerprint(obs), (Fingerprint{"a", "b", "b"}));
  EXPECT_TRUE(validate_observation(obs).empty());
}

TEST(Fingerprint, SimilarityWorkedValues) {
  EXPECT_DOUBLE_EQ(fingerprint_similarity({"a", "b", "b"}, {"a", "b", "c"}), 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(fingerprint_similarity({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(fingerprint_similarity({"a"}, {}), 0.0);
  EXPECT_DOUBLE_EQ(fingerprint_similarity({"x", "y"}, {"x", "y"}), 1.0);
}

TEST(Fingerprint, SymmetricAndBounded) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto a = page_fingerprint(support::random_observation(rng));
    const auto b = page_fingerprint(support::random_observation(rng));
    const double s = fingerprint_similarity(a, b);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    ASSERT_DOUBLE_EQ(s, fingerprint_similarity(b, a));
    ASSERT_DOUBLE_EQ(fingerprint_similarity(a, a), 1.0);
  }
}

TEST(Observation, ValidationCatchesBadIndexAndDescriptor) {
  ScreenObservation obs;
  DetectedElement e;
  e.index = 3;
  obs.elements.push_back(e);
  EXPECT_EQ(validate_observation(obs).size(), 2u);
}
