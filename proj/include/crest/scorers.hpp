#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crest/criterion.hpp"
#include "crest/embedding.hpp"
#include "crest/error.hpp"
#include "crest/term_stats.hpp"
#include "crest/text.hpp"

namespace crest {

enum class Architecture { Bm25, Bi, Late, Cross };

inline std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::Bm25: return "bm25";
    case Architecture::Bi: return "bi";
    case Architecture::Late: return "late";
    case Architecture::Cross: return "cross";
  }
  return "unknown";
}

inline Architecture parse_architecture(std::string_view s) {
  if (s == "bm25") return Architecture::Bm25;
  if (s == "bi" || s == "twin") return Architecture::Bi;
  if (s == "late" || s == "late-interaction" || s == "col") return Architecture::Late;
  if (s == "cross" || s == "mono") return Architecture::Cross;
  throw Error(Errc::InvalidArgument, "unknown scorer architecture '" + std::string(s) + "'");
}

/// Only comparable with scores from the same scorer_id.
struct RelevanceScore {
  double value = 0.0;
  std::string scorer_id;
  std::optional<Criterion> criterion;
};

// --- BM25 -------------------------------------------------------------------

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

inline double bm25_term_weight(double idf, double tf, double doc_len, double avgdl, const Bm25Params& p) {
  const double length_ratio = avgdl > 0.0 ? doc_len / avgdl : 1.0;
  return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * length_ratio));
}

/// Okapi BM25 over the distinct query terms.
inline RelevanceScore score_bm25(const Tokens& query, std::string_view doc_id, const CollectionStats& stats,
                                 const Bm25Params& params = {}) {
  const auto pos = stats.position(doc_id);
  if (!pos) throw Error(Errc::UnknownDocument, "document '" + std::string(doc_id) + "' is not indexed");
  const std::set<std::string> terms(query.begin(), query.end());
  double score = 0.0;
  for (const auto& t : terms) {
    const auto tf = stats.term_freq(*pos, t);
    if (tf == 0) continue;
    score += bm25_term_weight(stats.bm25_idf(t), tf, stats.length(*pos), stats.avgdl(), params);
  }
  return {score, "bm25", std::nullopt};
}

// --- bi-style -----------------------------------------------------------------

/// Similarity layer on top of the two embeddings: a learned diagonal
/// bilinear form sum_k w_k q_k d_k. Empty weights mean identity (plain dot).
struct BiModel {
  std::vector<double> diag;

  bool is_identity() const { return diag.empty(); }
  static BiModel identity(std::size_t dim) { return {std::vector<double>(dim, 1.0)}; }

  nlohmann::json to_json() const { return {{"diag", diag}}; }
  static BiModel from_json(const nlohmann::json& j) { return {j.at("diag").get<std::vector<double>>()}; }
};

inline void check_compatible(const Embedding& q, const Embedding& d) {
  if (q.provider != d.provider || q.version != d.version)
    throw Error(Errc::ProviderMismatch, "embeddings from " + q.provider + "@" + q.version + " and " + d.provider +
                                            "@" + d.version);
  if (q.dim() != d.dim())
    throw Error(Errc::DimensionMismatch,
                "query dim " + std::to_string(q.dim()) + " vs document dim " + std::to_string(d.dim()));
}

inline RelevanceScore score_bi(const Embedding& q, const Embedding& d, const BiModel& model = {}) {
  check_compatible(q, d);
  if (model.is_identity()) return {dot(q.values, d.values), "bi", std::nullopt};
  if (model.diag.size() != q.dim())
    throw Error(Errc::DimensionMismatch, "bi model has " + std::to_string(model.diag.size()) + " weights for dim " +
                                             std::to_string(q.dim()));
  double s = 0.0;
  for (std::size_t k = 0; k < q.dim(); ++k) s += model.diag[k] * q.values[k] * d.values[k];
  return {s, "bi", std::nullopt};
}

/// Gradient of score_bi with respect to the diagonal weights.
inline std::vector<double> bi_features(const Embedding& q, const Embedding& d) {
  check_compatible(q, d);
  std::vector<double> f(q.dim());
  for (std::size_t k = 0; k < q.dim(); ++k) f[k] = q.values[k] * d.values[k];
  return f;
}

// --- late interaction -----------------------------------------------------------

/// MaxSim: sum over query tokens of the best cosine against any document token.
inline RelevanceScore score_late_interaction(const TokenEmbeddingMatrix& q, const TokenEmbeddingMatrix& d) {
  if (q.empty() || d.empty()) throw Error(Errc::EmptyInput, "late interaction needs non-empty token matrices");
  double total = 0.0;
  for (const auto& qi : q.rows) {
    double best = -1.0;
    for (const auto& dj : d.rows) best = std::max(best, cosine(qi, dj));
    total += best;
  }
  return {total, "late", std::nullopt};
}

// --- cross-style ------------------------------------------------------------------

inline constexpr std::size_t kCrossBaseFeatures = 4;

/// Tokens kept per side: the budget minus three separator slots, split evenly.
inline std::size_t cross_side_budget(std::size_t budget) {
  if (budget < 2) throw Error(Errc::InvalidArgument, "cross token budget must be at least 2");
  return budget < 3 ? 0 : (budget - 3) / 2;
}

inline std::pair<Tokens, Tokens> truncate_pair(const Tokens& query, const Tokens& doc, std::size_t budget) {
  const std::size_t side = cross_side_budget(budget);
  Tokens q(query.begin(), query.begin() + static_cast<std::ptrdiff_t>(std::min(side, query.size())));
  Tokens d(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(std::min(side, doc.size())));
  return {std::move(q), std::move(d)};
}

/// The joint input a remote cross-encoder receives.
inline std::string frame_cross_input(std::string_view query, std::string_view doc, std::size_t budget) {
  const auto [q, d] = truncate_pair(preprocess(query), preprocess(doc), budget);
  return "[CLS] " + join(q) + (q.empty() ? "" : " ") + "[SEP] " + join(d) + (d.empty() ? "" : " ") + "[SEP]";
}

/// Linear model over joint query/document overlap features.
///
/// Feature layout:
///   0  share of the query's idf mass covered by shared tokens
///   1  share of query bigrams present in the document
///   2  length ratio min(|q|,|d|) / max(|q|,|d|)
///   3  share of distinct document tokens also in the query
///   4+ idf mass of shared tokens, hashed into `hash_buckets` slots
struct CrossModel {
  std::size_t budget = 512;
  std::size_t hash_buckets = 64;
  std::vector<double> weights;

  static CrossModel initial(std::size_t budget = 512, std::size_t hash_buckets = 64) {
    CrossModel m{budget, hash_buckets, std::vector<double>(kCrossBaseFeatures + hash_buckets, 0.0)};
    m.weights[0] = 1.0;
    return m;
  }

  std::size_t feature_count() const { return kCrossBaseFeatures + hash_buckets; }

  nlohmann::json to_json() const {
    return {{"budget", budget}, {"hash_buckets", hash_buckets}, {"weights", weights}};
  }
  static CrossModel from_json(const nlohmann::json& j) {
    CrossModel m{j.at("budget").get<std::size_t>(), j.at("hash_buckets").get<std::size_t>(),
                 j.at("weights").get<std::vector<double>>()};
    if (m.weights.size() != m.feature_count()) throw Error(Errc::ParseError, "cross model weight count mismatch");
    return m;
  }
};

inline std::vector<double> cross_features(const Tokens& query, const Tokens& doc, const CollectionStats& stats,
                                          const CrossModel& model) {
  std::vector<double> f(model.feature_count(), 0.0);
  const auto [q, d] = truncate_pair(query, doc, model.budget);
  if (q.empty() || d.empty()) return f;

  const std::set<std::string> uq(q.begin(), q.end());
  const std::set<std::string> ud(d.begin(), d.end());
  double query_mass = 0.0;
  for (const auto& t : uq) query_mass += stats.smooth_idf(t);

  std::size_t shared = 0;
  double shared_mass = 0.0;
  for (const auto& t : uq) {
    if (!ud.contains(t)) continue;
    ++shared;
    const double w = stats.smooth_idf(t);
    shared_mass += w;
    f[kCrossBaseFeatures + fnv1a64(t) % model.hash_buckets] += w / query_mass;
  }
  f[0] = shared_mass / query_mass;

  std::set<std::pair<std::string, std::string>> qb, db;
  for (std::size_t i = 0; i + 1 < q.size(); ++i) qb.emplace(q[i], q[i + 1]);
  for (std::size_t i = 0; i + 1 < d.size(); ++i) db.emplace(d[i], d[i + 1]);
  if (!qb.empty()) {
    std::size_t common = 0;
    for (const auto& b : qb) common += db.contains(b);
    f[1] = static_cast<double>(common) / static_cast<double>(qb.size());
  }
  f[2] = static_cast<double>(std::min(q.size(), d.size())) / static_cast<double>(std::max(q.size(), d.size()));
  f[3] = static_cast<double>(shared) / static_cast<double>(ud.size());
  return f;
}

inline RelevanceScore score_cross(std::string_view query, std::string_view doc, const CollectionStats& stats,
                                  const CrossModel& model) {
  const auto f = cross_features(preprocess(query), preprocess(doc), stats, model);
  if (model.weights.size() != f.size()) throw Error(Errc::DimensionMismatch, "cross model weight count mismatch");
  return {dot(model.weights, f), "cross", std::nullopt};
}

}  // namespace crest
