#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/criterion.hpp"
#include "crest/error.hpp"
#include "crest/random.hpp"
#include "crest/run.hpp"

namespace crest {

enum class Stage { IR, RR };

inline std::string_view stage_name(Stage s) { return s == Stage::IR ? "ir" : "rr"; }
inline Stage parse_stage(std::string_view s) {
  if (s == "ir" || s == "IR") return Stage::IR;
  if (s == "rr" || s == "RR") return Stage::RR;
  throw Error(Errc::InvalidArgument, "unknown stage '" + std::string(s) + "'");
}

/// Aggregation weights of one stage and scorer architecture. Each weight
/// lies in [0,1].
struct CriterionWeights {
  std::array<double, kCriterionCount> values{};
  CriterionSet active;
  Stage stage = Stage::IR;
  std::string architecture;
  std::uint64_t seed = 0;
  double validation_mrr = 0.0;

  static CriterionWeights uniform(Stage stage, std::string architecture,
                                  CriterionSet active = CriterionSet::model_criteria()) {
    CriterionWeights w;
    w.stage = stage;
    w.architecture = std::move(architecture);
    w.active = active;
    for (Criterion c : active.to_vector()) w.values[index_of(c)] = 1.0 / static_cast<double>(active.size());
    return w;
  }

  double operator[](Criterion c) const { return values[index_of(c)]; }

  void set(Criterion c, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidArgument, "criterion weight outside [0,1]");
    values[index_of(c)] = v;
  }

  /// Weights of the active criteria divided by their sum.
  std::array<double, kCriterionCount> normalized() const {
    std::array<double, kCriterionCount> out{};
    double total = 0.0;
    for (Criterion c : active.to_vector()) total += values[index_of(c)];
    if (total > 0.0)
      for (Criterion c : active.to_vector()) out[index_of(c)] = values[index_of(c)] / total;
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::object();
    for (Criterion c : kModelCriteria) w[std::string(name_of(c))] = values[index_of(c)];
    return {{"stage", stage_name(stage)}, {"architecture", architecture}, {"weights", w},
            {"active", active.names()},   {"seed", seed},                 {"validation_mrr", validation_mrr}};
  }

  static CriterionWeights from_json(const nlohmann::json& j) {
    CriterionWeights w;
    w.stage = parse_stage(j.at("stage").get<std::string>());
    w.architecture = j.value("architecture", std::string{});
    for (const auto& [name, v] : j.at("weights").items()) w.set(parse_criterion(name), v.get<double>());
    w.active = CriterionSet::from_names(j.at("active").get<std::vector<std::string>>());
    w.seed = j.value("seed", std::uint64_t{0});
    w.validation_mrr = j.value("validation_mrr", 0.0);
    return w;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    out << to_json().dump(1) << '\n';
  }

  static CriterionWeights load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open weights " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + ": " + e.what());
    }
  }
};

/// Min-max scaling to [0,1] over one candidate pool. A constant pool maps to 0.
inline std::vector<double> minmax_normalize(std::span<const double> scores) {
  std::vector<double> out(scores.size(), 0.0);
  if (scores.empty()) return out;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
  return out;
}

/// Weighted mean of normalized per-criterion scores over the criteria active
/// both in the request and in the weights. Renormalizing by the active
/// weight sum keeps scores comparable when criteria are missing.
inline double aggregate(const CriterionMap<double>& normalized, const CriterionWeights& weights, CriterionSet active) {
  const CriterionSet effective = active & weights.active;
  if (effective.empty()) throw Error(Errc::NoActiveCriteria, "no criterion is active for aggregation");
  double num = 0.0;
  double den = 0.0;
  for (Criterion c : effective.to_vector()) {
    if (!normalized.has(c))
      throw Error(Errc::InvalidArgument, "missing score for active criterion " + std::string(name_of(c)));
    num += weights[c] * *normalized[c];
    den += weights[c];
  }
  if (den <= 0.0) throw Error(Errc::AllZeroWeights, "all active criterion weights are zero");
  return num / den;
}

/// Drops a criterion from the ensemble ("w/o X").
inline CriterionWeights ablate(const CriterionWeights& weights, Criterion excluded) {
  if (!weights.active.contains(excluded))
    throw Error(Errc::InvalidArgument, std::string(name_of(excluded)) + " is not active");
  if (weights.active.size() == 1)
    throw Error(Errc::LastCriterion, "cannot remove the last active criterion " + std::string(name_of(excluded)));
  CriterionWeights out = weights;
  out.active.erase(excluded);
  return out;
}

inline CriterionWeights include(const CriterionWeights& weights, Criterion c) {
  CriterionWeights out = weights;
  out.active.insert(c);
  return out;
}

// --- weight training --------------------------------------------------------------

struct PoolCandidate {
  std::string doc_id;
  CriterionMap<double> scores;  // normalized per criterion over the query's pool
};

/// Frozen per-criterion scores of one validation query.
struct PoolQuery {
  std::string query_id;
  CriterionSet active;
  std::vector<PoolCandidate> candidates;
};

struct ValidationPool {
  std::vector<PoolQuery> queries;
};

struct WeightTrainConfig {
  double margin = 0.1;
  double learning_rate = 0.5;
  std::size_t epochs = 100;
  std::size_t negatives_per_positive = 1;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"margin", margin}, {"learning_rate", learning_rate}, {"epochs", epochs},
            {"negatives_per_positive", negatives_per_positive}, {"seed", seed}};
  }
  static WeightTrainConfig from_json(const nlohmann::json& j) {
    WeightTrainConfig c;
    c.margin = j.value("margin", c.margin);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.negatives_per_positive = j.value("negatives_per_positive", c.negatives_per_positive);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct WeightTrainResult {
  CriterionWeights weights;           // best checkpoint by validation MRR
  std::vector<CriterionWeights> checkpoints;  // one per epoch
  std::vector<double> epoch_loss;
  std::vector<double> epoch_mrr;
  std::size_t best_epoch = 0;
};

/// MRR of ranking each pool query's candidates by aggregated score.
inline double pool_mrr(const ValidationPool& pool, const Qrels& qrels, const CriterionWeights& weights) {
  if (pool.queries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : pool.queries) {
    std::vector<std::pair<double, const std::string*>> ranked;
    for (const auto& c : q.candidates) ranked.emplace_back(aggregate(c.scores, weights, q.active), &c.doc_id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : *a.second < *b.second;
    });
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (qrels.is_relevant(q.query_id, *ranked[i].second)) {
        total += 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
  }
  return total / static_cast<double>(pool.queries.size());
}

namespace detail {

struct WeightTriple {
  CriterionSet active;
  std::array<double, kCriterionCount> delta{};  // s(d+) - s(d-) per criterion
};

inline double triple_margin(const WeightTriple& t, const std::array<double, kCriterionCount>& w, CriterionSet active) {
  double num = 0.0, den = 0.0;
  for (Criterion c : (t.active & active).to_vector()) {
    num += w[index_of(c)] * t.delta[index_of(c)];
    den += w[index_of(c)];
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

/// Learns aggregation weights with frozen criterion scorers: projected
/// gradient descent on the hinge loss over aggregated scores, weights clamped
/// to [0,1] after every step, checkpoint per epoch, best validation MRR wins.
inline WeightTrainResult train_weights(const ValidationPool& pool, const Qrels& qrels, const WeightTrainConfig& config,
                                       CriterionWeights initial) {
  std::vector<detail::WeightTriple> triples;
  for (const auto& q : pool.queries) {
    std::vector<const PoolCandidate*> positives, negatives;
    for (const auto& c : q.candidates)
      (qrels.is_relevant(q.query_id, c.doc_id) ? positives : negatives).push_back(&c);
    if (positives.empty() || negatives.empty()) continue;
    Rng rng = stream_for(config.seed, q.query_id);
    for (const auto* pos : positives) {
      std::vector<const PoolCandidate*> pick = negatives;
      shuffle(pick, rng);
      pick.resize(std::min(pick.size(), std::max<std::size_t>(1, config.negatives_per_positive)));
      for (const auto* neg : pick) {
        detail::WeightTriple t{q.active & initial.active, {}};
        for (Criterion c : t.active.to_vector()) {
          if (!pos->scores.has(c) || !neg->scores.has(c))
            throw Error(Errc::InvalidArgument, "pool candidate lacks score for " + std::string(name_of(c)));
          t.delta[index_of(c)] = *pos->scores[c] - *neg->scores[c];
        }
        if (!t.active.empty()) triples.push_back(t);
      }
    }
  }
  if (triples.empty())
    throw Error(Errc::InsufficientValidationData, "validation pool has no (relevant, irrelevant) candidate pair");

  WeightTrainResult result;
  CriterionWeights current = initial;
  current.seed = config.seed;
  const CriterionSet active = initial.active;
  const auto criteria = active.to_vector();

  auto loss_of = [&](const std::array<double, kCriterionCount>& w) {
    double total = 0.0;
    for (const auto& t : triples) total += std::max(0.0, config.margin - detail::triple_margin(t, w, active));
    return total / static_cast<double>(triples.size());
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::array<double, kCriterionCount> grad{};
    const auto& w = current.values;
    for (const auto& t : triples) {
      const double m = detail::triple_margin(t, w, active);
      if (config.margin - m <= 0.0) continue;
      double den = 0.0;
      for (Criterion c : (t.active & active).to_vector()) den += w[index_of(c)];
      if (den <= 0.0) continue;
      // d/dw_c of sum_k w_k delta_k / sum_k w_k
      for (Criterion c : (t.active & active).to_vector())
        grad[index_of(c)] -= (t.delta[index_of(c)] - m) / den;
    }
    auto next = current.values;
    double total = 0.0;
    for (Criterion c : criteria) {
      const std::size_t i = index_of(c);
      next[i] = std::clamp(next[i] - config.learning_rate * grad[i] / static_cast<double>(triples.size()), 0.0, 1.0);
      total += next[i];
    }
    if (total > 0.0) current.values = next;

    result.epoch_loss.push_back(loss_of(current.values));
    current.validation_mrr = pool_mrr(pool, qrels, current);
    result.epoch_mrr.push_back(current.validation_mrr);
    result.checkpoints.push_back(current);
  }

  if (result.checkpoints.empty()) {
    current.validation_mrr = pool_mrr(pool, qrels, current);
    result.weights = current;
    return result;
  }
  result.best_epoch = 0;
  for (std::size_t e = 1; e < result.epoch_mrr.size(); ++e)
    if (result.epoch_mrr[e] > result.epoch_mrr[result.best_epoch]) result.best_epoch = e;
  result.weights = result.checkpoints[result.best_epoch];
  return result;
}

}  // namespace crest
