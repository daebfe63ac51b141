#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crest/error.hpp"
#include "crest/hash.hpp"
#include "crest/term_stats.hpp"
#include "crest/text.hpp"

namespace crest {

struct ProviderInfo {
  std::string name;
  std::string version;
  std::size_t dim = 0;

  bool operator==(const ProviderInfo&) const = default;

  nlohmann::json to_json() const { return {{"name", name}, {"version", version}, {"dim", dim}}; }
  static ProviderInfo from_json(const nlohmann::json& j) {
    return {j.at("name").get<std::string>(), j.at("version").get<std::string>(), j.at("dim").get<std::size_t>()};
  }
  std::string to_string() const { return name + "@" + version + "/" + std::to_string(dim); }
};

struct Embedding {
  std::vector<double> values;
  std::string provider;
  std::string version;
  bool degenerate = false;  // empty input, all-zero vector

  std::size_t dim() const { return values.size(); }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual ProviderInfo info() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "cosine of vectors with different dimensions");
  if (std::equal(a.begin(), a.end(), b.begin(), b.end())) return l2_norm(a) > 0.0 ? 1.0 : 0.0;
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// Built-in bi-style embedding: token counts hashed into `dim` buckets,
/// weighted by smoothed idf, then L2-normalized. Versioned by the idf table
/// it was fitted on. With `max_tokens` set, only the leading tokens of a text
/// are encoded, like an encoder with a fixed input length.
class HashedTfidfProvider final : public EmbeddingProvider {
 public:
  static constexpr std::string_view kName = "hashed-tfidf";

  HashedTfidfProvider(std::size_t dim, std::shared_ptr<const CollectionStats> stats, std::size_t max_tokens = 0)
      : dim_(dim), max_tokens_(max_tokens), stats_(std::move(stats)) {
    if (dim_ == 0) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
    if (!stats_) throw Error(Errc::InvalidArgument, "hashed-tfidf provider needs collection statistics");
    version_ = "1-" + stats_->fingerprint();
    if (max_tokens_) version_ += "-t" + std::to_string(max_tokens_);
  }

  std::size_t max_tokens() const { return max_tokens_; }

  ProviderInfo info() const override { return {std::string(kName), version_, dim_}; }

  Embedding embed(std::string_view text) const override { return embed_tokens(preprocess(text)); }

  Embedding embed_tokens(const Tokens& tokens) const {
    Embedding e{std::vector<double>(dim_, 0.0), std::string(kName), version_, tokens.empty()};
    const std::size_t n = max_tokens_ ? std::min(max_tokens_, tokens.size()) : tokens.size();
    std::unordered_map<std::string_view, std::uint32_t> tf;
    for (std::size_t i = 0; i < n; ++i) ++tf[tokens[i]];
    std::vector<std::pair<std::string_view, std::uint32_t>> sorted(tf.begin(), tf.end());
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [t, n] : sorted)
      e.values[bucket(t)] += static_cast<double>(n) * stats_->smooth_idf(std::string(t));
    const double norm = l2_norm(e.values);
    if (norm > 0.0)
      for (double& v : e.values) v /= norm;
    return e;
  }

  std::size_t bucket(std::string_view token) const { return fnv1a64(token) % dim_; }

 private:
  std::size_t dim_;
  std::size_t max_tokens_;
  std::shared_ptr<const CollectionStats> stats_;
  std::string version_;
};

/// Per-token vectors for late interaction, one row per preprocessed token.
struct TokenEmbeddingMatrix {
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

/// Token vectors built from hashed character trigrams of "#token#", so
/// inflections of a word land close together. L2-normalized.
class TrigramTokenEmbedder {
 public:
  explicit TrigramTokenEmbedder(std::size_t dim = 128) : dim_(dim) {
    if (dim_ == 0) throw Error(Errc::InvalidArgument, "token embedding dimension must be positive");
  }

  std::size_t dim() const { return dim_; }

  std::vector<double> embed_token(std::string_view token) const {
    std::vector<double> v(dim_, 0.0);
    const std::string padded = "#" + std::string(token) + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) v[fnv1a64(std::string_view(padded).substr(i, 3)) % dim_] += 1.0;
    const double norm = l2_norm(v);
    if (norm > 0.0)
      for (double& x : v) x /= norm;
    return v;
  }

  TokenEmbeddingMatrix embed(const Tokens& tokens) const {
    TokenEmbeddingMatrix m;
    m.rows.reserve(tokens.size());
    for (const auto& t : tokens) m.rows.push_back(embed_token(t));
    return m;
  }

  TokenEmbeddingMatrix embed(std::string_view text) const { return embed(preprocess(text)); }

 private:
  std::size_t dim_;
};

}  // namespace crest
