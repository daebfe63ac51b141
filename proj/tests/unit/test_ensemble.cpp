#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "crest/ensemble.hpp"

using namespace crest;

namespace {

CriterionMap<double> scores(double i, double c, double f, double r) {
  CriterionMap<double> m;
  m.set(Criterion::Impact, i);
  m.set(Criterion::Condition, c);
  m.set(Criterion::Frequency, f);
  m.set(Criterion::Reproducibility, r);
  return m;
}

CriterionWeights weights(double i, double c, double f, double r) {
  auto w = CriterionWeights::uniform(Stage::RR, "cross");
  w.set(Criterion::Impact, i);
  w.set(Criterion::Condition, c);
  w.set(Criterion::Frequency, f);
  w.set(Criterion::Reproducibility, r);
  return w;
}

// Planted-weight pool: the relevant candidate maximises the planted
// aggregate of normalized scores plus small noise.
struct PlantedPool {
  ValidationPool pool;
  Qrels qrels;
};

PlantedPool planted_pool(const std::array<double, 4>& planted, std::size_t queries, std::uint64_t seed) {
  PlantedPool out;
  Rng rng{seed};
  for (std::size_t q = 0; q < queries; ++q) {
    PoolQuery pq{"q" + std::to_string(q), CriterionSet::model_criteria(), {}};
    std::array<std::vector<double>, 4> norm;
    for (auto& v : norm) {
      std::vector<double> raw(10);
      for (double& x : raw) x = uniform01(rng);
      v = minmax_normalize(raw);
    }
    double best = -1e9;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      PoolCandidate pc{"d" + std::to_string(i), {}};
      double agg = 0.01 * standard_normal(rng);
      for (std::size_t c = 0; c < 4; ++c) {
        pc.scores.set(kModelCriteria[c], norm[c][i]);
        agg += planted[c] * norm[c][i];
      }
      if (agg > best) {
        best = agg;
        arg = i;
      }
      pq.candidates.push_back(std::move(pc));
    }
    out.qrels.add(pq.query_id, "d" + std::to_string(arg), 1);
    out.pool.queries.push_back(std::move(pq));
  }
  return out;
}

}  // namespace

TEST(Aggregate, EqualWeightsSingleHit) {
  const auto w = CriterionWeights::uniform(Stage::IR, "bi");
  EXPECT_DOUBLE_EQ(aggregate(scores(1, 0, 0, 0), w, CriterionSet::model_criteria()), 0.25);
}

TEST(Aggregate, SingleActiveCriterionPassesThrough) {
  const auto w = weights(0.7, 0.1, 0.1, 0.1);
  EXPECT_DOUBLE_EQ(aggregate(scores(0.42, 0.9, 0.9, 0.9), w, CriterionSet{Criterion::Impact}), 0.42);
}

TEST(Aggregate, ErrorsForEmptyMissingAndZero) {
  const auto w = CriterionWeights::uniform(Stage::IR, "bi");
  try {
    aggregate(scores(1, 1, 1, 1), w, CriterionSet{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoActiveCriteria);
  }
  CriterionMap<double> partial;
  partial.set(Criterion::Impact, 1.0);
  EXPECT_THROW(aggregate(partial, w, CriterionSet::model_criteria()), Error);
  try {
    aggregate(scores(1, 1, 1, 1), weights(0, 0, 0, 0), CriterionSet::model_criteria());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllZeroWeights);
  }
}

TEST(Aggregate, ScaleInvariantInWeights) {
  Rng rng{4};
  for (int t = 0; t < 100; ++t) {
    const auto s = scores(uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng));
    auto w = weights(0.4 * uniform01(rng) + 0.01, 0.4 * uniform01(rng), 0.4 * uniform01(rng), 0.4 * uniform01(rng));
    auto w2 = w;
    for (double& v : w2.values) v *= 2.0;
    EXPECT_NEAR(aggregate(s, w, CriterionSet::model_criteria()), aggregate(s, w2, CriterionSet::model_criteria()),
                1e-12);
  }
}

TEST(Aggregate, MonotoneInEachCriterionScore) {
  Rng rng{9};
  for (int t = 0; t < 200; ++t) {
    const auto w = weights(uniform01(rng), uniform01(rng), uniform01(rng), 0.99 * uniform01(rng) + 0.01);
    auto s = scores(uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng));
    const double before = aggregate(s, w, CriterionSet::model_criteria());
    const Criterion c = kModelCriteria[uniform_index(rng, 4)];
    s.set(c, std::min(1.0, *s[c] + 0.1));
    EXPECT_GE(aggregate(s, w, CriterionSet::model_criteria()), before);
  }
}

TEST(Aggregate, ImpactOnlyWeightsReproduceImpactRanking) {
  Rng rng{12};
  const auto w = weights(1, 0, 0, 0);
  std::vector<std::pair<double, double>> rows;
  for (int i = 0; i < 50; ++i) {
    const auto s = scores(uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng));
    rows.emplace_back(*s[Criterion::Impact], aggregate(s, w, CriterionSet::model_criteria()));
  }
  for (const auto& [impact, agg] : rows) EXPECT_DOUBLE_EQ(impact, agg);
}

TEST(Normalize, MinMaxAndConstantPool) {
  const std::vector<double> v{2.0, 4.0, 3.0};
  EXPECT_EQ(minmax_normalize(v), (std::vector<double>{0.0, 1.0, 0.5}));
  const std::vector<double> flat{7.0, 7.0};
  EXPECT_EQ(minmax_normalize(flat), (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(minmax_normalize(std::vector<double>{}).empty());
}

TEST(Weights, SetRejectsOutOfRange) {
  auto w = CriterionWeights::uniform(Stage::IR, "bi");
  EXPECT_THROW(w.set(Criterion::Impact, 1.5), Error);
  EXPECT_THROW(w.set(Criterion::Impact, -0.1), Error);
  EXPECT_NO_THROW(w.set(Criterion::Impact, 1.0));
}

TEST(Weights, JsonRoundTrip) {
  auto w = weights(0.5, 0.25, 0.0, 1.0);
  w.seed = 3;
  w.validation_mrr = 0.6;
  const auto path = (std::filesystem::temp_directory_path() / "crest_w.json").string();
  w.save(path);
  const auto back = CriterionWeights::load(path);
  EXPECT_EQ(back.values, w.values);
  EXPECT_EQ(back.active, w.active);
  EXPECT_EQ(back.stage, Stage::RR);
  EXPECT_EQ(back.validation_mrr, 0.6);
  std::filesystem::remove(path);
}

TEST(Ablation, AblateIncludeInvolution) {
  const auto w = weights(0.5, 0.2, 0.2, 0.1);
  for (Criterion c : kModelCriteria) {
    const auto back = include(ablate(w, c), c);
    EXPECT_EQ(back.active, w.active);
    EXPECT_EQ(back.values, w.values);
  }
  auto one = w;
  one.active = CriterionSet{Criterion::Impact};
  try {
    ablate(one, Criterion::Impact);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LastCriterion);
  }
  EXPECT_THROW(ablate(one, Criterion::Condition), Error);
}

TEST(WeightTraining, WeightsStayInUnitInterval) {
  const auto p = planted_pool({0.6, 0.2, 0.1, 0.1}, 100, 3);
  WeightTrainConfig cfg;
  cfg.learning_rate = 5.0;
  cfg.epochs = 30;
  const auto r = train_weights(p.pool, p.qrels, cfg, CriterionWeights::uniform(Stage::IR, "bi"));
  for (const auto& ck : r.checkpoints)
    for (double v : ck.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_EQ(r.checkpoints.size(), 30u);
  EXPECT_EQ(r.weights.validation_mrr, *std::max_element(r.epoch_mrr.begin(), r.epoch_mrr.end()));
}

TEST(WeightTraining, RecoversPlantedWeights) {
  const std::array<double, 4> planted{0.6, 0.2, 0.1, 0.1};
  const auto p = planted_pool(planted, 300, 11);
  WeightTrainConfig cfg;
  cfg.negatives_per_positive = 9;
  const auto r = train_weights(p.pool, p.qrels, cfg, CriterionWeights::uniform(Stage::IR, "bi"));
  const auto n = r.weights.normalized();
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(n[index_of(kModelCriteria[c])], planted[c], 0.1);
}

TEST(WeightTraining, FlatHingeLeavesWeightsUnchanged) {
  // Every positive beats every negative by more than the margin.
  ValidationPool pool;
  Qrels qrels;
  for (int q = 0; q < 5; ++q) {
    PoolQuery pq{"q" + std::to_string(q), CriterionSet::model_criteria(), {}};
    pq.candidates.push_back({"pos", scores(1, 1, 1, 1)});
    pq.candidates.push_back({"neg", scores(0, 0, 0, 0)});
    qrels.add(pq.query_id, "pos", 1);
    pool.queries.push_back(pq);
  }
  const auto init = weights(0.4, 0.3, 0.2, 0.1);
  const auto r = train_weights(pool, qrels, {}, init);
  EXPECT_EQ(r.weights.values, init.values);
  EXPECT_EQ(r.epoch_loss.back(), 0.0);
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(WeightTraining, NoPairsThrows) {
  ValidationPool pool;
  Qrels qrels;
  PoolQuery pq{"q", CriterionSet::model_criteria(), {{"only", scores(1, 1, 1, 1)}}};
  pool.queries.push_back(pq);
  qrels.add("q", "only", 1);
  try {
    train_weights(pool, qrels, {}, CriterionWeights::uniform(Stage::IR, "bi"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientValidationData);
  }
}

TEST(WeightTraining, DeterministicForSeed) {
  const auto p = planted_pool({0.3, 0.3, 0.3, 0.1}, 60, 5);
  WeightTrainConfig cfg;
  cfg.seed = 4;
  cfg.epochs = 20;
  const auto a = train_weights(p.pool, p.qrels, cfg, CriterionWeights::uniform(Stage::IR, "bi"));
  const auto b = train_weights(p.pool, p.qrels, cfg, CriterionWeights::uniform(Stage::IR, "bi"));
  EXPECT_EQ(a.weights.values, b.weights.values);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}
