#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "crest/index.hpp"
#include "crest/synth.hpp"

using namespace crest;

namespace {

Corpus small_corpus(std::size_t n, std::uint64_t seed) {
  SynthParams p;
  p.n_trs = n;
  return synth_corpus(p, seed).corpus;
}

Candidates brute_force(const DocumentIndex& idx, const std::vector<double>& scores) {
  Candidates all;
  for (std::size_t i = 0; i < idx.size(); ++i) all.push_back({idx.doc_id(i), i, scores[i]});
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
  return all;
}

}  // namespace

TEST(Index, BuildIsDeterministic) {
  const auto c = small_corpus(40, 1);
  const auto a = build_index(c);
  const auto b = build_index(c);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  EXPECT_EQ(a.corpus_hash(), corpus_hash(c));
  EXPECT_THROW(build_index(Corpus{}), Error);
}

TEST(Index, SaveLoadRoundTripAndCorpusCheck) {
  const auto c = small_corpus(30, 2);
  IndexOptions opt;
  opt.max_tokens = 12;
  const auto idx = build_index(c, opt);
  const auto path = (std::filesystem::temp_directory_path() / "crest_index.json").string();
  idx.save(path);
  const auto back = DocumentIndex::load(path, &c);
  EXPECT_EQ(back.content_hash(), idx.content_hash());
  EXPECT_EQ(back.provider(), idx.provider());
  EXPECT_EQ(back.builtin_provider()->info(), idx.provider());

  const auto other = small_corpus(30, 3);
  try {
    DocumentIndex::load(path, &other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorpusMismatch);
  }
  std::filesystem::remove(path);
}

TEST(Index, AppendRequiresTheIndexProvider) {
  const auto c = small_corpus(20, 4);
  auto idx = build_index(c);
  const HashedTfidfProvider wrong(32, idx.shared_stats());
  try {
    idx.append("new", "some text", wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProviderMismatch);
  }
  const auto before = Bm25IndexScorer().score_all(idx, "w1 w2 w3");
  idx.append("new", "wa wb", *idx.builtin_provider());
  const auto after = Bm25IndexScorer().score_all(idx, "w1 w2 w3");
  ASSERT_EQ(after.size(), before.size() + 1);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after[i], before[i]);
}

TEST(Index, TopKIsPrefixOfFullRankingForEveryScorer) {
  const auto c = small_corpus(60, 5);
  const auto idx = build_index(c);
  const BiIndexScorer bi(idx.builtin_provider(), BiModel{});
  const Bm25IndexScorer bm25;
  const LateIndexScorer late;
  for (const IndexScorer* s : std::initializer_list<const IndexScorer*>{&bm25, &bi, &late}) {
    const std::string q = c[7].headline;
    const auto full = brute_force(idx, s->score_all(idx, q));
    for (std::size_t k : {1u, 5u, 60u, 100u}) {
      const auto top = retrieve_topk(idx, q, *s, k);
      ASSERT_EQ(top.size(), std::min<std::size_t>(k, idx.size()));
      for (std::size_t i = 0; i < top.size(); ++i) {
        EXPECT_EQ(top[i].doc_id, full[i].doc_id) << s->id() << " k=" << k;
        EXPECT_EQ(top[i].score, full[i].score);
      }
    }
  }
}

TEST(Index, TiesBreakByDocumentId) {
  const auto c = small_corpus(25, 6);
  const auto idx = build_index(c);
  const std::vector<double> flat(idx.size(), 1.0);
  const auto top = select_top_k(idx, flat, 5);
  for (std::size_t i = 1; i < top.size(); ++i) EXPECT_LT(top[i - 1].doc_id, top[i].doc_id);
  EXPECT_EQ(top.front().doc_id, *std::min_element(idx.doc_ids().begin(), idx.doc_ids().end()));
}

TEST(Index, KZeroAndNonFiniteScoresRejected) {
  const auto c = small_corpus(10, 7);
  const auto idx = build_index(c);
  EXPECT_THROW(retrieve_topk(idx, "q", Bm25IndexScorer(), 0), Error);
  std::vector<double> bad(idx.size(), 0.0);
  bad[3] = std::nan("");
  EXPECT_THROW(select_top_k(idx, bad, 3), Error);
}
