#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/calibration.hpp"
#include "crest/dataset.hpp"
#include "crest/ensemble.hpp"
#include "crest/eval.hpp"
#include "crest/index.hpp"
#include "crest/pipeline.hpp"
#include "crest/train.hpp"

namespace crest {

/// Each TR's own answer is its only relevant document.
inline Qrels self_qrels(const Corpus& corpus) {
  Qrels q;
  for (const auto& tr : corpus) q.add(tr.id, tr.id, 1);
  return q;
}

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::size_t validation_size = 30;
  std::size_t test_size = 50;
  IndexOptions index;
  TrainConfig bi_train;
  TrainConfig cross_train;
  WeightTrainConfig weight_train;
  PipelineConfig pipeline;
  std::vector<Architecture> ir_candidates{Architecture::Bi};
  unsigned threads = 1;

  nlohmann::json to_json() const {
    std::vector<std::string> ir;
    for (auto a : ir_candidates) ir.emplace_back(architecture_name(a));
    return {{"seed", seed},
            {"validation_size", validation_size},
            {"test_size", test_size},
            {"index", {{"dim", index.dim}, {"token_dim", index.token_dim}, {"max_tokens", index.max_tokens}}},
            {"bi_train", bi_train.to_json()},
            {"cross_train", cross_train.to_json()},
            {"weight_train", weight_train.to_json()},
            {"pipeline", pipeline.to_json()},
            {"ir_candidates", ir},
            {"threads", threads}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.validation_size = j.value("validation_size", c.validation_size);
    c.test_size = j.value("test_size", c.test_size);
    if (j.contains("index")) {
      c.index.dim = j["index"].value("dim", c.index.dim);
      c.index.token_dim = j["index"].value("token_dim", c.index.token_dim);
      c.index.max_tokens = j["index"].value("max_tokens", c.index.max_tokens);
    }
    if (j.contains("bi_train")) c.bi_train = TrainConfig::from_json(j["bi_train"]);
    if (j.contains("cross_train")) c.cross_train = TrainConfig::from_json(j["cross_train"]);
    if (j.contains("weight_train")) c.weight_train = WeightTrainConfig::from_json(j["weight_train"]);
    if (j.contains("pipeline")) c.pipeline = PipelineConfig::from_json(j["pipeline"]);
    if (j.contains("ir_candidates")) {
      c.ir_candidates.clear();
      for (const auto& a : j["ir_candidates"]) c.ir_candidates.push_back(parse_architecture(a.get<std::string>()));
    }
    c.threads = j.value("threads", c.threads);
    return c;
  }
};

/// Everything trained from one corpus: splits, datasets, index, the bi and
/// cross model of every dataset.
struct Experiment {
  Corpus corpus;
  Qrels qrels;
  ExperimentConfig config;
  SplitPlan split;
  std::map<std::string, Dataset> datasets;
  std::shared_ptr<const DocumentIndex> index;
  std::shared_ptr<const EmbeddingProvider> provider;
  std::map<std::string, TrainedScorer> bi_models;
  std::map<std::string, TrainedScorer> cross_models;

  std::vector<TroubleReport> trs(const std::vector<std::string>& ids) const {
    std::map<std::string, const TroubleReport*> by_id;
    for (const auto& tr : corpus) by_id[tr.id] = &tr;
    std::vector<TroubleReport> out;
    for (const auto& id : ids) out.push_back(*by_id.at(id));
    return out;
  }
  std::vector<TroubleReport> validation_trs() const { return trs(split.validation); }
  std::vector<TroubleReport> test_trs() const { return trs(split.test); }

  /// Engine with `ir` as first-stage architecture and cross re-rankers.
  /// Weights are left unset.
  Engine engine(Architecture ir) const {
    Engine e;
    e.index = index;
    std::shared_ptr<const IndexScorer> shared;
    if (ir == Architecture::Bm25) shared = std::make_shared<Bm25IndexScorer>();
    if (ir == Architecture::Late) shared = std::make_shared<LateIndexScorer>();
    if (ir == Architecture::Cross) throw Error(Errc::ConfigInvalid, "cross scorer cannot run the IR stage");
    for (const auto& [name, ds] : datasets) {
      if (ir == Architecture::Bi)
        e.ir[name] = std::make_shared<BiIndexScorer>(provider, *bi_models.at(name).bi, "bi/" + name);
      else
        e.ir[name] = shared;
      e.rr[name] = std::make_shared<CrossPairScorer>(*cross_models.at(name).cross, "cross/" + name);
    }
    return e;
  }
};

inline Experiment prepare_experiment(Corpus corpus, Qrels qrels, const ExperimentConfig& config) {
  Experiment ex;
  ex.corpus = std::move(corpus);
  ex.qrels = std::move(qrels);
  ex.config = config;
  ex.split = make_splits(ex.corpus, config.validation_size, config.test_size, config.seed);
  for (const auto& spec : DatasetSpec::standard())
    ex.datasets.emplace(spec.name, build_dataset(ex.corpus, spec, ex.split, config.seed, config.threads));

  auto index = std::make_shared<DocumentIndex>(build_index(ex.corpus, config.index));
  ex.provider = index->builtin_provider();
  ex.index = index;

  TrainingContext ctx{ex.provider, index->shared_stats(), config.pipeline.token_budget, 64};
  for (const auto& [name, ds] : ex.datasets) {
    ex.bi_models.emplace(name, train_scorer(ds, config.bi_train, Architecture::Bi, ctx));
    ex.cross_models.emplace(name, train_scorer(ds, config.cross_train, Architecture::Cross, ctx));
  }
  return ex;
}

struct WeightsOutcome {
  CriterionWeights ir;
  CriterionWeights rr;
  WeightTrainResult ir_training;
  WeightTrainResult rr_training;
};

/// Learns IR weights on the validation pool, then RR weights on the top-K
/// pool of the weighted IR stage.
inline WeightsOutcome train_stage_weights(const Experiment& ex, Engine& engine, Architecture ir,
                                          CriterionSet active = CriterionSet::model_criteria()) {
  const auto val = ex.validation_trs();
  PipelineConfig cfg = ex.config.pipeline;
  cfg.ir = ir;
  cfg.active = active;
  WeightsOutcome out;
  auto ir_pool = build_pool(engine, val, cfg, Stage::IR);
  out.ir_training = train_weights(ir_pool, ex.qrels, ex.config.weight_train,
                                  CriterionWeights::uniform(Stage::IR, std::string(architecture_name(ir)), active));
  out.ir = out.ir_training.weights;
  engine.ir_weights = out.ir;

  auto rr_pool = build_pool(engine, val, cfg, Stage::RR);
  out.rr_training = train_weights(rr_pool, ex.qrels, ex.config.weight_train,
                                  CriterionWeights::uniform(Stage::RR, "cross", active));
  out.rr = out.rr_training.weights;
  engine.rr_weights = out.rr;
  return out;
}

struct IrSelection {
  Architecture best = Architecture::Bi;
  std::map<std::string, double> validation_mrr;  // per candidate, IR-stage CREST
};

/// Picks the IR architecture whose weighted IR stage has the best validation MRR.
inline IrSelection select_ir(const Experiment& ex) {
  if (ex.config.ir_candidates.empty()) throw Error(Errc::ConfigInvalid, "no IR candidates configured");
  IrSelection sel;
  double best = -1.0;
  const auto val = ex.validation_trs();
  for (Architecture a : ex.config.ir_candidates) {
    Engine e = ex.engine(a);
    PipelineConfig cfg = ex.config.pipeline;
    cfg.ir = a;
    cfg.rerank = false;
    auto pool = build_pool(e, val, cfg, Stage::IR);
    auto w = train_weights(pool, ex.qrels, ex.config.weight_train,
                           CriterionWeights::uniform(Stage::IR, std::string(architecture_name(a))));
    e.ir_weights = w.weights;
    const double m = mrr(run_query_set(e, val, cfg, "select", false, ex.config.threads).run, ex.qrels);
    sel.validation_mrr[std::string(architecture_name(a))] = m;
    if (m > best) {
      best = m;
      sel.best = a;
    }
  }
  return sel;
}

/// Named test runs: every criterion model, its baseline, the single model
/// and CREST, all through the same two-stage pipeline.
inline std::vector<std::pair<std::string, Run>> standard_runs(const Experiment& ex, const Engine& engine,
                                                              const std::vector<TroubleReport>& queries,
                                                              bool isolated = false) {
  std::vector<std::pair<std::string, Run>> out;
  PipelineConfig base = ex.config.pipeline;
  for (const auto& spec : DatasetSpec::standard()) {
    PipelineConfig cfg = base;
    cfg.ir_ensemble = cfg.rr_ensemble = false;
    cfg.single_dataset = spec.name;
    out.emplace_back(spec.name, run_query_set(engine, queries, cfg, spec.name, isolated, ex.config.threads).run);
  }
  out.emplace_back("CREST", run_query_set(engine, queries, base, "CREST", isolated, ex.config.threads).run);
  return out;
}

/// CREST with all criteria and with each active criterion removed.
inline std::vector<std::pair<std::string, Run>> ablation_runs(const Experiment& ex, const Engine& engine,
                                                              const std::vector<TroubleReport>& queries) {
  std::vector<std::pair<std::string, Run>> out;
  out.emplace_back("CREST", run_query_set(engine, queries, ex.config.pipeline, "CREST", false, ex.config.threads).run);
  for (Criterion c : engine.ir_weights->active.to_vector()) {
    Engine e = engine;
    e.ir_weights = ablate(*engine.ir_weights, c);
    e.rr_weights = ablate(*engine.rr_weights, c);
    const std::string name = std::string("w/o ") + letter_of(c);
    out.emplace_back(name, run_query_set(e, queries, ex.config.pipeline, name, false, ex.config.threads).run);
  }
  return out;
}

inline TableSet tabulate(const std::vector<std::pair<std::string, Run>>& runs, const Qrels& qrels,
                         const std::string& split = "test") {
  std::vector<std::pair<std::string, const Run*>> refs;
  for (const auto& [name, run] : runs) refs.emplace_back(name, &run);
  return evaluate_matrix(refs, qrels, split);
}

}  // namespace crest
