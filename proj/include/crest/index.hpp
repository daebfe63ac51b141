#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crest/embedding.hpp"
#include "crest/error.hpp"
#include "crest/hash.hpp"
#include "crest/scorers.hpp"
#include "crest/term_stats.hpp"
#include "crest/trouble_report.hpp"

namespace crest {

struct IndexOptions {
  std::size_t dim = 512;        // hashed-tfidf embedding size
  std::size_t token_dim = 128;  // late-interaction token vectors
  std::size_t max_tokens = 0;   // hashed-tfidf input length limit, 0 = none
};

/// Precomputed document side: answers of every TR, their BM25 statistics,
/// bi embeddings and late-interaction token matrices. Immutable after build
/// except for append(), which leaves collection statistics frozen.
class DocumentIndex {
 public:
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& doc_ids() const { return ids_; }
  const std::string& doc_id(std::size_t pos) const { return ids_.at(pos); }
  const std::string& text(std::size_t pos) const { return texts_.at(pos); }
  const Tokens& tokens(std::size_t pos) const { return tokens_.at(pos); }
  const Embedding& embedding(std::size_t pos) const { return embeddings_.at(pos); }
  const TokenEmbeddingMatrix& token_matrix(std::size_t pos) const { return matrices_.at(pos); }
  const CollectionStats& stats() const { return *stats_; }
  std::shared_ptr<const CollectionStats> shared_stats() const { return stats_; }
  const ProviderInfo& provider() const { return provider_; }
  const TrigramTokenEmbedder& token_embedder() const { return token_embedder_; }
  const std::string& corpus_hash() const { return corpus_hash_; }

  std::optional<std::size_t> position(std::string_view doc_id) const { return stats_->position(doc_id); }

  /// Built-in provider reconstructed from the stored statistics, or null when
  /// the index was built with an external provider.
  std::shared_ptr<const EmbeddingProvider> builtin_provider() const {
    if (provider_.name != HashedTfidfProvider::kName) return nullptr;
    return std::make_shared<HashedTfidfProvider>(provider_.dim, stats_, max_tokens_);
  }

  void append(const std::string& doc_id, const std::string& text, const EmbeddingProvider& provider) {
    if (provider.info() != provider_)
      throw Error(Errc::ProviderMismatch,
                  "index uses " + provider_.to_string() + ", got " + provider.info().to_string());
    auto stats = std::make_shared<CollectionStats>(*stats_);
    auto toks = preprocess(text);
    stats->append(doc_id, toks);
    stats_ = std::move(stats);
    ids_.push_back(doc_id);
    texts_.push_back(text);
    embeddings_.push_back(provider.embed(text));
    matrices_.push_back(token_embedder_.embed(toks));
    tokens_.push_back(std::move(toks));
    rehash();
  }

  nlohmann::json to_json() const {
    nlohmann::json docs = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i)
      docs.push_back({{"id", ids_[i]}, {"text", texts_[i]}, {"embedding", embeddings_[i].values}});
    return {{"format", "crest-index"},
            {"format_version", 1},
            {"provider", provider_.to_json()},
            {"token_dim", token_embedder_.dim()},
            {"max_tokens", max_tokens_},
            {"corpus_hash", corpus_hash_},
            {"build_count", stats_->doc_count()},
            {"avgdl", stats_->avgdl()},
            {"df", stats_->df_json()},
            {"documents", std::move(docs)}};
  }

  /// Byte-level fingerprint of the persisted form.
  std::string content_hash() const { return Fingerprint().add(to_json().dump()).hex(); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    out << to_json().dump() << '\n';
  }

  /// Refuses to load when `corpus` is given and its hash differs from the one
  /// recorded in the file.
  static DocumentIndex load(const std::string& path, const Corpus* corpus = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open index " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + ": " + e.what());
    }
    if (j.value("format", std::string{}) != "crest-index") throw Error(Errc::ParseError, path + " is not a crest index");
    const std::string stored_hash = j.at("corpus_hash").get<std::string>();
    if (corpus && crest::corpus_hash(*corpus) != stored_hash)
      throw Error(Errc::CorpusMismatch, "index " + path + " was built from a different corpus");

    DocumentIndex idx;
    idx.provider_ = ProviderInfo::from_json(j.at("provider"));
    idx.token_embedder_ = TrigramTokenEmbedder(j.at("token_dim").get<std::size_t>());
    idx.max_tokens_ = j.value("max_tokens", std::size_t{0});
    for (const auto& d : j.at("documents")) {
      idx.ids_.push_back(d.at("id").get<std::string>());
      idx.texts_.push_back(d.at("text").get<std::string>());
      idx.tokens_.push_back(preprocess(idx.texts_.back()));
      idx.embeddings_.push_back(
          Embedding{d.at("embedding").get<std::vector<double>>(), idx.provider_.name, idx.provider_.version,
                    idx.tokens_.back().empty()});
      idx.matrices_.push_back(idx.token_embedder_.embed(idx.tokens_.back()));
    }
    idx.stats_ = std::make_shared<CollectionStats>(CollectionStats::restore(
        idx.ids_, idx.tokens_, j.at("build_count").get<std::uint64_t>(), j.at("avgdl").get<double>(), j.at("df")));
    idx.rehash();
    if (idx.corpus_hash_ != stored_hash) throw Error(Errc::ParseError, path + ": corpus hash does not match content");
    if (auto builtin = idx.builtin_provider(); builtin && builtin->info() != idx.provider_)
      throw Error(Errc::ProviderMismatch, path + ": stored statistics do not match provider version");
    return idx;
  }

  friend DocumentIndex build_index(const Corpus&, const IndexOptions&, std::shared_ptr<const EmbeddingProvider>);

 private:
  void rehash() {
    Fingerprint fp;
    fp.add(static_cast<std::uint64_t>(ids_.size()));
    for (std::size_t i = 0; i < ids_.size(); ++i) fp.add(ids_[i]).add(texts_[i]);
    corpus_hash_ = fp.hex();
  }

  ProviderInfo provider_;
  TrigramTokenEmbedder token_embedder_{128};
  std::size_t max_tokens_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  std::vector<Tokens> tokens_;
  std::vector<Embedding> embeddings_;
  std::vector<TokenEmbeddingMatrix> matrices_;
  std::shared_ptr<const CollectionStats> stats_ = std::make_shared<CollectionStats>();
  std::string corpus_hash_;
};

/// Indexes every TR answer. Without an external provider the built-in
/// hashed-tfidf provider is fitted on this corpus.
inline DocumentIndex build_index(const Corpus& corpus, const IndexOptions& options = {},
                                 std::shared_ptr<const EmbeddingProvider> external = nullptr) {
  if (corpus.empty()) throw Error(Errc::EmptyIndex, "cannot index an empty corpus");
  DocumentIndex idx;
  idx.token_embedder_ = TrigramTokenEmbedder(options.token_dim);
  idx.max_tokens_ = options.max_tokens;
  for (const auto& tr : corpus) {
    idx.ids_.push_back(tr.id);
    idx.texts_.push_back(tr.answer);
    idx.tokens_.push_back(preprocess(tr.answer));
  }
  idx.stats_ = std::make_shared<CollectionStats>(idx.ids_, idx.tokens_);
  std::shared_ptr<const EmbeddingProvider> provider =
      external ? external : std::make_shared<HashedTfidfProvider>(options.dim, idx.stats_, options.max_tokens);
  idx.provider_ = provider->info();
  idx.embeddings_ = provider->embed_batch(idx.texts_);
  for (const auto& toks : idx.tokens_) idx.matrices_.push_back(idx.token_embedder_.embed(toks));
  idx.rehash();
  return idx;
}

struct Candidate {
  std::string doc_id;
  std::size_t position = 0;
  double score = 0.0;
};

/// Ordered by score descending, ties by ascending doc id.
using Candidates = std::vector<Candidate>;

inline bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

/// Selects the best k of `scores` (one per index position).
inline Candidates select_top_k(const DocumentIndex& index, std::span<const double> scores, std::size_t k) {
  if (scores.size() != index.size()) throw Error(Errc::InvalidArgument, "one score per indexed document expected");
  Candidates all;
  all.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(Errc::InvalidArgument, "non-finite score for " + index.doc_id(i));
    all.push_back({index.doc_id(i), i, scores[i]});
  }
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
  all.resize(n);
  return all;
}

/// Scores a query against every indexed document.
class IndexScorer {
 public:
  virtual ~IndexScorer() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> score_all(const DocumentIndex& index, std::string_view query) const = 0;
};

class Bm25IndexScorer final : public IndexScorer {
 public:
  explicit Bm25IndexScorer(Bm25Params params = {}) : params_(params) {}
  std::string id() const override { return "bm25"; }

  std::vector<double> score_all(const DocumentIndex& index, std::string_view query) const override {
    const auto q = preprocess(query);
    const std::set<std::string> terms(q.begin(), q.end());
    const auto& stats = index.stats();
    std::vector<std::pair<std::string, double>> weighted;
    for (const auto& t : terms) weighted.emplace_back(t, stats.bm25_idf(t));
    std::vector<double> out(index.size(), 0.0);
    for (std::size_t pos = 0; pos < index.size(); ++pos) {
      double s = 0.0;
      for (const auto& [t, idf] : weighted) {
        const auto tf = stats.term_freq(pos, t);
        if (tf) s += bm25_term_weight(idf, tf, stats.length(pos), stats.avgdl(), params_);
      }
      out[pos] = s;
    }
    return out;
  }

 private:
  Bm25Params params_;
};

class BiIndexScorer final : public IndexScorer {
 public:
  BiIndexScorer(std::shared_ptr<const EmbeddingProvider> provider, BiModel model, std::string name = "bi")
      : provider_(std::move(provider)), model_(std::move(model)), name_(std::move(name)) {
    if (!provider_) throw Error(Errc::ConfigInvalid, "bi scorer needs an embedding provider");
  }
  std::string id() const override { return name_; }

  std::vector<double> score_all(const DocumentIndex& index, std::string_view query) const override {
    if (provider_->info() != index.provider())
      throw Error(Errc::ProviderMismatch,
                  "query provider " + provider_->info().to_string() + " vs index " + index.provider().to_string());
    const Embedding q = provider_->embed(query);
    std::vector<double> out(index.size());
    for (std::size_t pos = 0; pos < index.size(); ++pos) out[pos] = score_bi(q, index.embedding(pos), model_).value;
    return out;
  }

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  BiModel model_;
  std::string name_;
};

/// Documents without tokens score 0.
class LateIndexScorer final : public IndexScorer {
 public:
  std::string id() const override { return "late"; }

  std::vector<double> score_all(const DocumentIndex& index, std::string_view query) const override {
    const auto q = index.token_embedder().embed(query);
    std::vector<double> out(index.size(), 0.0);
    if (q.empty()) return out;
    for (std::size_t pos = 0; pos < index.size(); ++pos) {
      const auto& d = index.token_matrix(pos);
      if (!d.empty()) out[pos] = score_late_interaction(q, d).value;
    }
    return out;
  }
};

inline Candidates retrieve_topk(const DocumentIndex& index, std::string_view query, const IndexScorer& scorer,
                                std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidArgument, "K must be at least 1");
  if (index.empty()) throw Error(Errc::EmptyIndex, "index has no documents");
  const auto scores = scorer.score_all(index, query);
  return select_top_k(index, scores, k);
}

}  // namespace crest
