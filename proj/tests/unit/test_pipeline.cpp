#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "crest/experiment.hpp"
#include "crest/synth.hpp"

using namespace crest;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.seed = 3;
  cfg.validation_size = 10;
  cfg.test_size = 10;
  cfg.index.dim = 128;
  cfg.index.max_tokens = 24;
  cfg.bi_train.learning_rate = 0.05;
  cfg.bi_train.epochs = 3;
  cfg.cross_train.learning_rate = 0.05;
  cfg.cross_train.epochs = 3;
  cfg.weight_train.epochs = 10;
  cfg.weight_train.negatives_per_positive = 5;
  cfg.pipeline.k = 15;
  cfg.pipeline.token_budget = 51;
  return cfg;
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthParams p;
    p.n_trs = 70;
    p.missing_criterion_rate = 0.1;
    auto s = synth_corpus(p, 9);
    ex = new Experiment(prepare_experiment(std::move(s.corpus), std::move(s.qrels), small_config()));
    engine = new Engine(ex->engine(Architecture::Bi));
    train_stage_weights(*ex, *engine, Architecture::Bi);
  }
  static void TearDownTestSuite() {
    delete engine;
    delete ex;
  }

  static std::vector<std::string> ids(const PipelineResult& r) {
    std::vector<std::string> out;
    for (const auto& b : r.ranking) out.push_back(b.doc_id);
    return out;
  }

  static Experiment* ex;
  static Engine* engine;
};

Experiment* Pipeline::ex = nullptr;
Engine* Pipeline::engine = nullptr;

}  // namespace

TEST_F(Pipeline, KEqualToCorpusSizeMatchesIsolatedRerank) {
  PipelineConfig cfg = ex->config.pipeline;
  cfg.k = ex->index->size();
  for (const auto& tr : ex->test_trs()) {
    const auto bundle = build_query_bundle(tr, CriterionSet::all());
    const auto two = run_two_stage(bundle, *engine, cfg);
    const auto iso = run_isolated_rr(bundle, *engine, cfg);
    ASSERT_EQ(ids(two), ids(iso)) << tr.id;
    for (std::size_t i = 0; i < two.ranking.size(); ++i)
      EXPECT_EQ(two.ranking[i].aggregated, iso.ranking[i].aggregated);
  }
}

TEST_F(Pipeline, EnsembleOffEqualsSingleModelPipeline) {
  PipelineConfig cfg = ex->config.pipeline;
  cfg.ir_ensemble = cfg.rr_ensemble = false;
  const auto& stats = ex->index->stats();
  CrossModel rr = *ex->cross_models.at("SingleModel").cross;
  rr.budget = cfg.token_budget;
  for (const auto& tr : ex->test_trs()) {
    const auto bundle = build_query_bundle(tr, CriterionSet::all());
    const auto got = ids(run_two_stage(bundle, *engine, cfg));

    // Independent single-model pipeline: bi top-K on the whole observation,
    // then cross scores of the same query, sorted with the id tie-break.
    const HashedTfidfProvider provider(ex->index->provider().dim, ex->index->shared_stats(), 24);
    const auto q = provider.embed(bundle.full);
    std::vector<std::pair<double, std::string>> ir;
    for (std::size_t i = 0; i < ex->index->size(); ++i)
      ir.emplace_back(score_bi(q, ex->index->embedding(i), *ex->bi_models.at("SingleModel").bi).value,
                      ex->index->doc_id(i));
    std::sort(ir.begin(), ir.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    ir.resize(cfg.k);
    std::vector<std::pair<double, std::string>> rr_scores;
    for (const auto& [s, id] : ir) {
      const auto pos = *ex->index->position(id);
      rr_scores.emplace_back(dot(rr.weights, cross_features(preprocess(bundle.full), ex->index->tokens(pos), stats, rr)), id);
    }
    std::sort(rr_scores.begin(), rr_scores.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> expected;
    for (const auto& [s, id] : rr_scores) expected.push_back(id);
    EXPECT_EQ(got, expected) << tr.id;
  }
}

TEST_F(Pipeline, RerankedSetIsTheIrTopK) {
  PipelineConfig cfg = ex->config.pipeline;
  PipelineConfig ir_only = cfg;
  ir_only.rerank = false;
  for (const auto& tr : ex->test_trs()) {
    const auto bundle = build_query_bundle(tr, CriterionSet::all());
    auto a = ids(run_two_stage(bundle, *engine, cfg));
    auto b = ids(run_two_stage(bundle, *engine, ir_only));
    EXPECT_EQ(a.size(), cfg.k);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST_F(Pipeline, DeterministicAndThreadIndependent) {
  const auto queries = ex->test_trs();
  PipelineConfig cfg = ex->config.pipeline;
  const auto serial = run_query_set(*engine, queries, cfg, "t", false, 1, true);
  const auto threaded = run_query_set(*engine, queries, cfg, "t", false, 4, true);
  cfg.parallel = true;
  const auto fanned = run_query_set(*engine, queries, cfg, "t", false, 1, true);
  for (const auto& [q, entries] : serial.run.data()) {
    ASSERT_EQ(threaded.run.ranking(q).size(), entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      EXPECT_EQ(threaded.run.ranking(q)[i].doc_id, entries[i].doc_id);
      EXPECT_EQ(fanned.run.ranking(q)[i].score, entries[i].score);
    }
  }
  EXPECT_EQ(serial.breakdowns, threaded.breakdowns);
}

TEST_F(Pipeline, BreakdownRecomputesAggregate) {
  const auto tr = ex->test_trs().front();
  const auto r = run_two_stage(build_query_bundle(tr, CriterionSet::all()), *engine, ex->config.pipeline);
  const auto& info = r.final_stage();
  ASSERT_TRUE(info.ensemble);
  for (const auto& b : r.ranking) {
    double num = 0.0, den = 0.0;
    for (Criterion c : info.criteria.to_vector()) {
      num += (*info.weights)[c] * *b.normalized[c];
      den += (*info.weights)[c];
    }
    EXPECT_NEAR(b.aggregated, num / den, 1e-12);
    EXPECT_TRUE(b.ir_aggregated.has_value());
  }
}

TEST_F(Pipeline, TogglingCriterionOffDropsItsScore) {
  const auto tr = ex->test_trs().front();
  PipelineConfig cfg = ex->config.pipeline;
  cfg.active = CriterionSet{Criterion::Impact, Criterion::Condition, Criterion::Reproducibility};
  const auto r = run_two_stage(build_query_bundle(tr, CriterionSet::all()), *engine, cfg);
  for (const auto& b : r.ranking) {
    EXPECT_FALSE(b.raw.has(Criterion::Frequency));
    EXPECT_TRUE(b.raw.has(Criterion::Impact));
  }
}

TEST_F(Pipeline, HeadlineOnlyFallsBackToSingleModel) {
  TroubleReport tr = ex->test_trs().front();
  tr.observation = parse_observation("");
  const auto r = run_two_stage(build_query_bundle(tr, CriterionSet::all()), *engine, ex->config.pipeline);
  EXPECT_FALSE(r.final_stage().ensemble);
  EXPECT_FALSE(r.diagnostics.empty());
  EXPECT_EQ(r.ranking.size(), ex->config.pipeline.k);
}

TEST_F(Pipeline, EnsembleWithoutWeightsIsAConfigError) {
  Engine bare = ex->engine(Architecture::Bm25);
  const auto tr = ex->test_trs().front();
  try {
    run_two_stage(build_query_bundle(tr, CriterionSet::all()), bare, ex->config.pipeline);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigInvalid);
  }
}

TEST_F(Pipeline, ValidationPoolShapes) {
  PipelineConfig cfg = ex->config.pipeline;
  const auto val = ex->validation_trs();
  const auto ir = build_pool(*engine, val, cfg, Stage::IR);
  const auto rr = build_pool(*engine, val, cfg, Stage::RR);
  ASSERT_EQ(ir.queries.size(), val.size());
  for (const auto& q : ir.queries) EXPECT_EQ(q.candidates.size(), ex->index->size());
  for (const auto& q : rr.queries) {
    EXPECT_EQ(q.candidates.size(), cfg.k);
    for (const auto& c : q.candidates)
      for (Criterion k : q.active.to_vector()) {
        EXPECT_GE(*c.scores[k], 0.0);
        EXPECT_LE(*c.scores[k], 1.0);
      }
  }
}

TEST(PipelineConfigJson, RoundTrip) {
  PipelineConfig c;
  c.k = 7;
  c.ir = Architecture::Late;
  c.rerank = false;
  c.active = CriterionSet{Criterion::Impact};
  const auto back = PipelineConfig::from_json(c.to_json());
  EXPECT_EQ(back.k, 7u);
  EXPECT_EQ(back.ir, Architecture::Late);
  EXPECT_FALSE(back.rerank);
  EXPECT_EQ(back.active, c.active);
  c.k = 0;
  EXPECT_THROW(c.validate(), Error);
}
