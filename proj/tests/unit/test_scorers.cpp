#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "crest/scorers.hpp"
#include "crest/train.hpp"

using namespace crest;

namespace {

std::shared_ptr<const CollectionStats> tiny_stats() {
  return std::make_shared<const CollectionStats>(
      std::vector<std::string>{"d1", "d2", "d3"},
      std::vector<Tokens>{{"a", "b", "a"}, {"b", "c"}, {"c"}});
}

}  // namespace

TEST(Bm25, MatchesHandComputedScore) {
  const auto stats = tiny_stats();
  // N = 3, avgdl = 2, df(a) = 1, df(c) = 2
  const double idf_a = std::log((3 - 1 + 0.5) / (1 + 0.5) + 1);
  const double idf_c = std::log((3 - 2 + 0.5) / (2 + 0.5) + 1);
  const double d1 = idf_a * 2 * 2.2 / (2 + 1.2 * (0.25 + 0.75 * 3.0 / 2.0));
  const double d2 = idf_c * 1 * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 2.0 / 2.0));
  const double d3 = idf_c * 1 * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 1.0 / 2.0));
  const Tokens q{"a", "c", "c"};
  EXPECT_NEAR(score_bm25(q, "d1", *stats).value, d1, 1e-12);
  EXPECT_NEAR(score_bm25(q, "d2", *stats).value, d2, 1e-12);
  EXPECT_NEAR(score_bm25(q, "d3", *stats).value, d3, 1e-12);
  EXPECT_EQ(score_bm25({"zzz"}, "d1", *stats).value, 0.0);
  EXPECT_THROW(score_bm25(q, "d9", *stats), Error);
}

TEST(Bm25, AppendFreezesCollectionStatistics) {
  auto stats = std::make_shared<CollectionStats>(*tiny_stats());
  const double before = score_bm25({"c"}, "d2", *stats).value;
  stats->append("d4", {"c", "c", "c", "c", "c"});
  EXPECT_EQ(score_bm25({"c"}, "d2", *stats).value, before);
  EXPECT_EQ(stats->doc_count(), 3u);
  EXPECT_EQ(stats->size(), 4u);
}

TEST(Embedding, UnitNormAndDegenerateEmpty) {
  const HashedTfidfProvider p(64, tiny_stats());
  const auto e = p.embed("a b c unseen");
  EXPECT_NEAR(l2_norm(e.values), 1.0, 1e-12);
  EXPECT_FALSE(e.degenerate);
  const auto z = p.embed("");
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(l2_norm(z.values), 0.0);
  EXPECT_EQ(cosine(z.values, e.values), 0.0);
}

TEST(Embedding, AppendedTextMovesTheVector) {
  const HashedTfidfProvider p(256, tiny_stats());
  const auto a = p.embed("a b");
  const auto b = p.embed("a b c c c");
  EXPECT_LT(cosine(a.values, b.values), 1.0 - 1e-6);
  EXPECT_GT(cosine(a.values, b.values), 0.0);
}

TEST(Embedding, TokenLimitIgnoresTheTail) {
  const HashedTfidfProvider full(64, tiny_stats());
  const HashedTfidfProvider limited(64, tiny_stats(), 2);
  EXPECT_EQ(limited.embed("a b c c").values, limited.embed("a b").values);
  EXPECT_NE(full.embed("a b c c").values, full.embed("a b").values);
  EXPECT_NE(limited.info().version, full.info().version);
}

TEST(BiScorer, IdenticalTextScoresOne) {
  const HashedTfidfProvider p(64, tiny_stats());
  const auto q = p.embed("a b c");
  EXPECT_NEAR(score_bi(q, q).value, 1.0, 1e-12);
  EXPECT_NEAR(score_bi(q, q, BiModel::identity(64)).value, 1.0, 1e-12);
}

TEST(BiScorer, MixedProvidersAreRejected) {
  const HashedTfidfProvider p(64, tiny_stats());
  const HashedTfidfProvider other(32, tiny_stats());
  auto q = p.embed("a");
  auto d = p.embed("b");
  d.version = "other";
  EXPECT_THROW(score_bi(q, d), Error);
  EXPECT_THROW(score_bi(q, other.embed("b")), Error);
}

TEST(LateInteraction, SelfScoreEqualsTokenCount) {
  const TrigramTokenEmbedder e(128);
  const auto q = e.embed(std::string_view("disk full after upgrade"));
  EXPECT_NEAR(score_late_interaction(q, q).value, 4.0, 1e-12);
  const auto d = e.embed(std::string_view("disk space"));
  EXPECT_LT(score_late_interaction(q, d).value, 4.0);
  EXPECT_THROW(score_late_interaction(q, TokenEmbeddingMatrix{}), Error);
}

TEST(CrossScorer, TruncatesToHalfOfBudgetMinusSeparators) {
  Tokens q, d;
  for (int i = 0; i < 9; ++i) q.push_back("q" + std::to_string(i));
  for (int i = 0; i < 9; ++i) d.push_back("d" + std::to_string(i));
  const auto [tq, td] = truncate_pair(q, d, 13);
  EXPECT_EQ(tq.size(), 5u);
  EXPECT_EQ(td.size(), 5u);
  EXPECT_EQ(tq.back(), "q4");
  EXPECT_EQ(frame_cross_input("one two", "three", 13), "[CLS] one two [SEP] three [SEP]");
}

TEST(CrossScorer, TextBeyondBudgetDoesNotChangeScore) {
  const auto stats = tiny_stats();
  const auto m = CrossModel::initial(13);
  const double a = score_cross("a b c", "a b c d e", *stats, m).value;
  const double b = score_cross("a b c", "a b c d e zz yy xx", *stats, m).value;
  EXPECT_EQ(a, b);
}

TEST(CrossScorer, EmptyDocumentHasZeroFeatures) {
  const auto stats = tiny_stats();
  const auto m = CrossModel::initial();
  const auto f = cross_features({"a"}, {}, *stats, m);
  for (double x : f) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(score_cross("a", "", *stats, m).value, 0.0);
}

TEST(CrossScorer, FullOverlapBeatsPartialOverlap) {
  const auto stats = tiny_stats();
  const auto m = CrossModel::initial();
  EXPECT_GT(score_cross("a c", "a c", *stats, m).value, score_cross("a c", "a b", *stats, m).value);
}

TEST(Hinge, LossValues) {
  EXPECT_EQ(hinge_loss(1.0, 0.0, 0.0), 1.0);
  EXPECT_EQ(hinge_loss(1.0, 3.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(hinge_loss(1.0, 0.25, 0.5), 1.25);
}

TEST(Hinge, GradientMatchesFiniteDifferences) {
  Rng rng{42};
  std::vector<std::vector<double>> deltas(30, std::vector<double>(6));
  for (auto& d : deltas)
    for (double& x : d) x = standard_normal(rng);
  std::vector<double> w(6);
  for (double& x : w) x = 0.3 * standard_normal(rng);
  const auto g = hinge_gradient(w, deltas, 1.0);
  const double h = 1e-7;
  for (std::size_t k = 0; k < w.size(); ++k) {
    auto up = w, down = w;
    up[k] += h;
    down[k] -= h;
    const double fd = (mean_hinge(up, deltas, 1.0) - mean_hinge(down, deltas, 1.0)) / (2 * h);
    EXPECT_NEAR(g[k], fd, 1e-5);
  }
}
