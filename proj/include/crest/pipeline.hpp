#pragma once

#include <algorithm>
#include <atomic>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "crest/dataset.hpp"
#include "crest/ensemble.hpp"
#include "crest/index.hpp"
#include "crest/run.hpp"
#include "crest/scorers.hpp"
#include "crest/trouble_report.hpp"

namespace crest {

/// Scores one query against a subset of indexed documents, jointly per pair.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual std::string id() const = 0;
  /// `budget` overrides the model's token budget when non-zero.
  virtual std::vector<double> score_pairs(const DocumentIndex& index, std::string_view query,
                                          std::span<const std::size_t> positions, std::size_t budget) const = 0;
};

class CrossPairScorer final : public PairScorer {
 public:
  explicit CrossPairScorer(CrossModel model, std::string name = "cross")
      : model_(std::move(model)), name_(std::move(name)) {}
  std::string id() const override { return name_; }

  std::vector<double> score_pairs(const DocumentIndex& index, std::string_view query,
                                  std::span<const std::size_t> positions, std::size_t budget) const override {
    CrossModel m = model_;
    if (budget) m.budget = budget;
    const auto q = preprocess(query);
    std::vector<double> out;
    out.reserve(positions.size());
    for (std::size_t pos : positions) out.push_back(dot(m.weights, cross_features(q, index.tokens(pos), index.stats(), m)));
    return out;
  }

 private:
  CrossModel model_;
  std::string name_;
};

struct PipelineConfig {
  std::size_t k = 100;
  Architecture ir = Architecture::Bi;
  bool rerank = true;  // cross re-ranking stage on/off
  bool ir_ensemble = true;
  bool rr_ensemble = true;
  CriterionSet active = CriterionSet::model_criteria();
  std::size_t token_budget = 512;
  std::string single_dataset = "SingleModel";  // model used when an ensemble is off
  bool parallel = false;                       // fan per-criterion scoring out to threads

  void validate() const {
    if (k == 0) throw Error(Errc::ConfigInvalid, "K must be positive");
    if (ir == Architecture::Cross) throw Error(Errc::ConfigInvalid, "cross scorer cannot run the IR stage");
    if (token_budget < 2) throw Error(Errc::ConfigInvalid, "token budget too small");
    DatasetSpec::from_name(single_dataset);
  }

  nlohmann::json to_json() const {
    return {{"k", k},
            {"ir", architecture_name(ir)},
            {"rr", rerank ? "cross" : "none"},
            {"ir_ensemble", ir_ensemble},
            {"rr_ensemble", rr_ensemble},
            {"active", active.names()},
            {"token_budget", token_budget},
            {"single_dataset", single_dataset},
            {"parallel", parallel}};
  }

  static PipelineConfig from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.k = j.value("k", c.k);
    if (j.contains("ir")) c.ir = parse_architecture(j.at("ir").get<std::string>());
    if (j.contains("rr")) {
      const auto rr = j.at("rr").get<std::string>();
      if (rr != "cross" && rr != "none") throw Error(Errc::ConfigInvalid, "rr must be 'cross' or 'none'");
      c.rerank = rr == "cross";
    }
    c.ir_ensemble = j.value("ir_ensemble", c.ir_ensemble);
    c.rr_ensemble = j.value("rr_ensemble", c.rr_ensemble);
    if (j.contains("active")) c.active = CriterionSet::from_names(j.at("active").get<std::vector<std::string>>());
    c.token_budget = j.value("token_budget", c.token_budget);
    c.single_dataset = j.value("single_dataset", c.single_dataset);
    c.parallel = j.value("parallel", c.parallel);
    return c;
  }
};

/// Loaded models and weights over one immutable index. Scorers are keyed by
/// the dataset they were trained on ("HTI", "SingleModel", ...).
struct Engine {
  std::shared_ptr<const DocumentIndex> index;
  std::map<std::string, std::shared_ptr<const IndexScorer>> ir;
  std::map<std::string, std::shared_ptr<const PairScorer>> rr;
  std::optional<CriterionWeights> ir_weights;
  std::optional<CriterionWeights> rr_weights;

  const IndexScorer& ir_scorer(const std::string& dataset) const {
    auto it = ir.find(dataset);
    if (it == ir.end() || !it->second) throw Error(Errc::ConfigInvalid, "no IR scorer for dataset " + dataset);
    return *it->second;
  }
  const PairScorer& rr_scorer(const std::string& dataset) const {
    auto it = rr.find(dataset);
    if (it == rr.end() || !it->second) throw Error(Errc::ConfigInvalid, "no RR scorer for dataset " + dataset);
    return *it->second;
  }
};

inline std::string criterion_dataset(Criterion c) { return DatasetSpec::for_criterion(c).name; }

/// Query text a non-ensemble model sees, matching how its dataset was built.
inline std::string single_query(const QueryBundle& bundle, const std::string& dataset) {
  const auto spec = DatasetSpec::from_name(dataset);
  if (!spec.required) return bundle.full;
  if (spec.fields().contains(*spec.required) && bundle.per_criterion.has(*spec.required))
    return *bundle.per_criterion[*spec.required];
  return bundle.base;
}

struct ScoreBreakdown {
  std::string doc_id;
  CriterionMap<double> raw;         // final stage, per active criterion
  CriterionMap<double> normalized;  // min-max over the stage's candidate pool
  double aggregated = 0.0;
  std::optional<double> ir_aggregated;  // IR stage score when re-ranked

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::object(), n = nlohmann::json::object();
    for (Criterion c : raw.present().to_vector()) r[std::string(name_of(c))] = *raw[c];
    for (Criterion c : normalized.present().to_vector()) n[std::string(name_of(c))] = *normalized[c];
    nlohmann::json j{{"doc_id", doc_id}, {"aggregated", aggregated}, {"raw", r}, {"normalized", n}};
    if (ir_aggregated) j["ir_aggregated"] = *ir_aggregated;
    return j;
  }
};

/// How one stage scored: the criteria used and weights, or the single model.
struct StageInfo {
  Stage stage = Stage::IR;
  bool ensemble = false;
  CriterionSet criteria;
  std::optional<CriterionWeights> weights;
  std::string single_dataset;

  nlohmann::json to_json() const {
    nlohmann::json j{{"stage", stage_name(stage)}, {"ensemble", ensemble}, {"criteria", criteria.names()}};
    if (weights) {
      nlohmann::json w = nlohmann::json::object();
      for (Criterion c : criteria.to_vector()) w[std::string(name_of(c))] = (*weights)[c];
      j["weights"] = w;
    }
    if (!ensemble) j["model"] = single_dataset;
    return j;
  }
};

struct PipelineResult {
  std::vector<ScoreBreakdown> ranking;
  std::vector<StageInfo> stages;
  std::vector<std::string> diagnostics;

  const StageInfo& final_stage() const { return stages.back(); }
};

namespace detail {

struct StageScores {
  std::vector<double> aggregated;
  std::vector<CriterionMap<double>> raw, normalized;
  StageInfo info;
};

template <class ScoreFn>
StageScores score_stage(Stage stage, const QueryBundle& bundle, const std::optional<CriterionWeights>& weights,
                        bool ensemble, const PipelineConfig& config, std::size_t pool_size, ScoreFn&& score,
                        std::vector<std::string>& diagnostics) {
  StageScores out;
  out.info.stage = stage;
  out.raw.resize(pool_size);
  out.normalized.resize(pool_size);

  CriterionSet criteria = bundle.model_criteria() & config.active;
  if (ensemble) {
    if (!weights) throw Error(Errc::ConfigInvalid, std::string(stage_name(stage)) + " ensemble enabled but no weights loaded");
    criteria = criteria & weights->active;
    if (criteria.empty()) {
      diagnostics.push_back(std::string(stage_name(stage)) + ": no active criteria, using base query");
      ensemble = false;
    }
  }

  if (!ensemble) {
    out.info.single_dataset = config.single_dataset;
    out.aggregated = score(config.single_dataset, single_query(bundle, config.single_dataset));
    return out;
  }

  out.info.ensemble = true;
  out.info.criteria = criteria;
  out.info.weights = *weights;
  const auto list = criteria.to_vector();
  std::vector<std::vector<double>> raw(list.size());
  if (config.parallel && list.size() > 1) {
    std::vector<std::future<std::vector<double>>> jobs;
    for (Criterion c : list)
      jobs.push_back(std::async(std::launch::async,
                                [&, c] { return score(criterion_dataset(c), *bundle.per_criterion[c]); }));
    for (std::size_t i = 0; i < list.size(); ++i) raw[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < list.size(); ++i) raw[i] = score(criterion_dataset(list[i]), *bundle.per_criterion[list[i]]);
  }

  out.aggregated.assign(pool_size, 0.0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto norm = minmax_normalize(raw[i]);
    for (std::size_t d = 0; d < pool_size; ++d) {
      out.raw[d].set(list[i], raw[i][d]);
      out.normalized[d].set(list[i], norm[d]);
    }
  }
  for (std::size_t d = 0; d < pool_size; ++d) out.aggregated[d] = aggregate(out.normalized[d], *weights, criteria);
  return out;
}

inline std::vector<ScoreBreakdown> collect(const DocumentIndex& index, std::span<const std::size_t> positions,
                                           StageScores& scores) {
  std::vector<ScoreBreakdown> out;
  out.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    ScoreBreakdown b;
    b.doc_id = index.doc_id(positions[i]);
    b.raw = std::move(scores.raw[i]);
    b.normalized = std::move(scores.normalized[i]);
    b.aggregated = scores.aggregated[i];
    out.push_back(std::move(b));
  }
  return out;
}

inline void sort_breakdowns(std::vector<ScoreBreakdown>& list) {
  std::sort(list.begin(), list.end(), [](const ScoreBreakdown& a, const ScoreBreakdown& b) {
    return a.aggregated != b.aggregated ? a.aggregated > b.aggregated : a.doc_id < b.doc_id;
  });
}

inline void rerank(const QueryBundle& bundle, const Engine& engine, const PipelineConfig& config,
                   std::vector<std::size_t> positions, const std::vector<std::optional<double>>& ir_scores,
                   PipelineResult& result) {
  const auto& index = *engine.index;
  auto scores = score_stage(
      Stage::RR, bundle, engine.rr_weights, config.rr_ensemble, config, positions.size(),
      [&](const std::string& dataset, const std::string& query) {
        return engine.rr_scorer(dataset).score_pairs(index, query, positions, config.token_budget);
      },
      result.diagnostics);
  result.stages.push_back(scores.info);
  result.ranking = collect(index, positions, scores);
  for (std::size_t i = 0; i < result.ranking.size(); ++i) result.ranking[i].ir_aggregated = ir_scores[i];
  sort_breakdowns(result.ranking);
}

}  // namespace detail

/// IR over the whole index, top-K, then (optionally) cross re-ranking of
/// those K candidates. Each stage aggregates per-criterion scores when its
/// ensemble is on, else scores the single model's query.
inline PipelineResult run_two_stage(const QueryBundle& bundle, const Engine& engine, const PipelineConfig& config) {
  config.validate();
  if (!engine.index || engine.index->empty()) throw Error(Errc::EmptyIndex, "no index loaded");
  const auto& index = *engine.index;
  PipelineResult result;

  auto ir = detail::score_stage(
      Stage::IR, bundle, engine.ir_weights, config.ir_ensemble, config, index.size(),
      [&](const std::string& dataset, const std::string& query) {
        return engine.ir_scorer(dataset).score_all(index, query);
      },
      result.diagnostics);
  result.stages.push_back(ir.info);
  const auto top = select_top_k(index, ir.aggregated, config.k);

  if (!config.rerank) {
    for (const auto& cand : top) {
      ScoreBreakdown b;
      b.doc_id = cand.doc_id;
      b.raw = ir.raw[cand.position];
      b.normalized = ir.normalized[cand.position];
      b.aggregated = cand.score;
      result.ranking.push_back(std::move(b));
    }
    return result;
  }

  std::vector<std::size_t> positions;
  std::vector<std::optional<double>> ir_scores;
  for (const auto& cand : top) {
    positions.push_back(cand.position);
    ir_scores.emplace_back(cand.score);
  }
  detail::rerank(bundle, engine, config, std::move(positions), ir_scores, result);
  return result;
}

/// Cross scoring of the query against every indexed document, no IR stage.
inline PipelineResult run_isolated_rr(const QueryBundle& bundle, const Engine& engine, const PipelineConfig& config) {
  config.validate();
  if (!engine.index || engine.index->empty()) throw Error(Errc::EmptyIndex, "no index loaded");
  std::vector<std::size_t> positions(engine.index->size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  PipelineResult result;
  detail::rerank(bundle, engine, config, std::move(positions),
                 std::vector<std::optional<double>>(engine.index->size()), result);
  return result;
}

struct QuerySetOutput {
  Run run;
  std::vector<nlohmann::json> breakdowns;  // one record per query, in query order
};

/// Runs every query TR through the pipeline. Queries are independent, so
/// they are spread over `threads` workers; output order follows the input.
inline QuerySetOutput run_query_set(const Engine& engine, std::span<const TroubleReport> queries,
                                    const PipelineConfig& config, const std::string& tag, bool isolated = false,
                                    std::size_t threads = 1, bool keep_breakdowns = false) {
  std::vector<std::optional<PipelineResult>> results(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
  auto work = [&](std::size_t i) {
    try {
      const auto bundle = build_query_bundle(queries[i], CriterionSet::all());
      results[i] = isolated ? run_isolated_rr(bundle, engine, config) : run_two_stage(bundle, engine, config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) work(i);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  QuerySetOutput out{Run(tag), {}};
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& r = *results[i];
    std::vector<RunEntry> entries;
    for (const auto& b : r.ranking) entries.push_back({b.doc_id, b.aggregated});
    out.run.set(queries[i].id, std::move(entries));
    if (keep_breakdowns) {
      nlohmann::json stages = nlohmann::json::array(), list = nlohmann::json::array();
      for (const auto& s : r.stages) stages.push_back(s.to_json());
      for (const auto& b : r.ranking) list.push_back(b.to_json());
      out.breakdowns.push_back({{"query_id", queries[i].id}, {"stages", stages}, {"results", list},
                                {"diagnostics", r.diagnostics}});
    }
  }
  return out;
}

/// Frozen per-criterion scores for weight training. The IR pool is the whole
/// index; the RR pool is the top-K of the configured IR stage. Scores are
/// min-max normalized over each query's pool, as at inference time.
inline ValidationPool build_pool(const Engine& engine, std::span<const TroubleReport> queries,
                                 const PipelineConfig& config, Stage stage) {
  config.validate();
  if (!engine.index || engine.index->empty()) throw Error(Errc::EmptyIndex, "no index loaded");
  const auto& index = *engine.index;
  const auto all_weights = CriterionWeights::uniform(stage, "pool", CriterionSet::model_criteria());
  ValidationPool pool;
  for (const auto& tr : queries) {
    const auto bundle = build_query_bundle(tr, CriterionSet::all());
    if ((bundle.model_criteria() & config.active).empty()) continue;
    std::vector<std::size_t> positions;
    if (stage == Stage::IR) {
      positions.resize(index.size());
      for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    } else {
      PipelineConfig ir_only = config;
      ir_only.rerank = false;
      for (const auto& b : run_two_stage(bundle, engine, ir_only).ranking) positions.push_back(*index.position(b.doc_id));
    }
    std::vector<std::string> ignored;
    auto scores = detail::score_stage(
        stage, bundle, std::optional<CriterionWeights>(all_weights), true, config, positions.size(),
        [&](const std::string& dataset, const std::string& query) {
          if (stage == Stage::IR) return engine.ir_scorer(dataset).score_all(index, query);
          return engine.rr_scorer(dataset).score_pairs(index, query, positions, config.token_budget);
        },
        ignored);
    PoolQuery q{tr.id, scores.info.criteria, {}};
    for (std::size_t i = 0; i < positions.size(); ++i)
      q.candidates.push_back({index.doc_id(positions[i]), std::move(scores.normalized[i])});
    pool.queries.push_back(std::move(q));
  }
  return pool;
}

inline void save_breakdowns(const std::vector<nlohmann::json>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace crest
