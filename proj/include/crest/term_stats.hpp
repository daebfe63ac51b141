#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crest/error.hpp"
#include "crest/hash.hpp"
#include "crest/text.hpp"

namespace crest {

/// Document frequencies, per-document term counts and lengths of a document
/// collection. Frozen once built.
class CollectionStats {
 public:
  CollectionStats() = default;

  CollectionStats(std::vector<std::string> doc_ids, const std::vector<Tokens>& docs) : doc_ids_(std::move(doc_ids)) {
    if (doc_ids_.size() != docs.size()) throw Error(Errc::InvalidArgument, "doc id / token list size mismatch");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!positions_.emplace(doc_ids_[i], i).second)
        throw Error(Errc::InvalidArgument, "duplicate document id " + doc_ids_[i]);
      std::unordered_map<std::string, std::uint32_t> tf;
      for (const auto& t : docs[i]) ++tf[t];
      for (const auto& [t, n] : tf) ++df_[t];
      term_freqs_.push_back(std::move(tf));
      lengths_.push_back(static_cast<std::uint32_t>(docs[i].size()));
      total += docs[i].size();
    }
    build_count_ = docs.size();
    avgdl_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  }

  /// Adds a document without touching df, N or avgdl, so scores of existing
  /// documents stay exactly as they were.
  void append(const std::string& doc_id, const Tokens& tokens) {
    if (!positions_.emplace(doc_id, doc_ids_.size()).second)
      throw Error(Errc::InvalidArgument, "duplicate document id " + doc_id);
    doc_ids_.push_back(doc_id);
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    term_freqs_.push_back(std::move(tf));
    lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
  }

  std::size_t size() const { return doc_ids_.size(); }
  /// N as seen by idf (documents present at build time).
  std::uint64_t doc_count() const { return build_count_; }
  double avgdl() const { return avgdl_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::string& doc_id(std::size_t pos) const { return doc_ids_.at(pos); }
  std::uint32_t length(std::size_t pos) const { return lengths_.at(pos); }

  std::optional<std::size_t> position(std::string_view doc_id) const {
    const auto it = positions_.find(std::string(doc_id));
    if (it == positions_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t doc_freq(const std::string& term) const {
    const auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
  }

  std::uint32_t term_freq(std::size_t pos, const std::string& term) const {
    const auto& tf = term_freqs_.at(pos);
    const auto it = tf.find(term);
    return it == tf.end() ? 0 : it->second;
  }

  /// Okapi idf: ln((N - df + 0.5) / (df + 0.5) + 1).
  double bm25_idf(const std::string& term) const {
    const double n = static_cast<double>(build_count_);
    const double df = doc_freq(term);
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
  }

  /// Smoothed idf used for TF-IDF features: ln((N + 1) / (df + 1)) + 1.
  /// Strictly positive, also for unseen terms.
  double smooth_idf(const std::string& term) const {
    const double n = static_cast<double>(build_count_);
    return std::log((n + 1.0) / (doc_freq(term) + 1.0)) + 1.0;
  }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(build_count_);
    for (const auto& [t, n] : sorted_df()) fp.add(t).add(n);
    return fp.hex();
  }

  std::map<std::string, std::uint32_t> sorted_df() const { return {df_.begin(), df_.end()}; }

  nlohmann::json df_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [t, n] : sorted_df()) j[t] = n;
    return j;
  }

  /// Restores collection-level statistics saved at build time and recomputes
  /// per-document counts from the token lists.
  static CollectionStats restore(std::vector<std::string> doc_ids, const std::vector<Tokens>& docs,
                                 std::uint64_t build_count, double avgdl, const nlohmann::json& df) {
    CollectionStats s;
    s.doc_ids_ = std::move(doc_ids);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      s.positions_.emplace(s.doc_ids_[i], i);
      std::unordered_map<std::string, std::uint32_t> tf;
      for (const auto& t : docs[i]) ++tf[t];
      s.term_freqs_.push_back(std::move(tf));
      s.lengths_.push_back(static_cast<std::uint32_t>(docs[i].size()));
    }
    for (const auto& [t, n] : df.items()) s.df_[t] = n.get<std::uint32_t>();
    s.build_count_ = build_count;
    s.avgdl_ = avgdl;
    return s;
  }

 private:
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, std::size_t> positions_;
  std::unordered_map<std::string, std::uint32_t> df_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> term_freqs_;
  std::vector<std::uint32_t> lengths_;
  std::uint64_t build_count_ = 0;
  double avgdl_ = 0.0;
};

}  // namespace crest
