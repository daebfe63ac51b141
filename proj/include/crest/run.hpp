#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crest/error.hpp"
#include "crest/text.hpp"

namespace crest {

/// Relevance judgments: query id -> (doc id -> graded relevance). Only
/// relevance > 0 counts as relevant.
class Qrels {
 public:
  void add(const std::string& query, const std::string& doc, int relevance = 1) { data_[query][doc] = relevance; }

  bool has_query(const std::string& query) const { return data_.contains(query); }

  int relevance(const std::string& query, const std::string& doc) const {
    const auto q = data_.find(query);
    if (q == data_.end()) return 0;
    const auto d = q->second.find(doc);
    return d == q->second.end() ? 0 : d->second;
  }

  bool is_relevant(const std::string& query, const std::string& doc) const { return relevance(query, doc) > 0; }

  const std::map<std::string, int>& judgments(const std::string& query) const {
    const auto q = data_.find(query);
    if (q == data_.end()) throw Error(Errc::MissingQrels, "no judgments for query " + query);
    return q->second;
  }

  std::size_t relevant_count(const std::string& query) const {
    std::size_t n = 0;
    for (const auto& [doc, rel] : judgments(query))
      if (rel > 0) ++n;
    return n;
  }

  std::size_t size() const { return data_.size(); }
  const std::map<std::string, std::map<std::string, int>>& data() const { return data_; }

  /// TREC format: "query_id 0 doc_id relevance"
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    for (const auto& [q, docs] : data_)
      for (const auto& [d, rel] : docs) out << q << " 0 " << d << ' ' << rel << '\n';
  }

  static Qrels load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open qrels " + path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::istringstream fields(line);
      std::string q, iter, d;
      int rel = 0;
      if (!(fields >> q >> iter >> d >> rel))
        throw Error(Errc::ParseError, path + ":" + std::to_string(line_no) + ": expected 'qid 0 docid rel'");
      qrels.add(q, d, rel);
    }
    return qrels;
  }

 private:
  std::map<std::string, std::map<std::string, int>> data_;
};

struct RunEntry {
  std::string doc_id;
  double score = 0.0;
};

/// Ranked output per query. Entries are kept in rank order.
class Run {
 public:
  explicit Run(std::string tag = "crest") : tag_(std::move(tag)) {}

  void set(const std::string& query, std::vector<RunEntry> ranked) { data_[query] = std::move(ranked); }
  const std::vector<RunEntry>& ranking(const std::string& query) const { return data_.at(query); }
  const std::map<std::string, std::vector<RunEntry>>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  const std::string& tag() const { return tag_; }

  /// TREC format: "query_id Q0 doc_id rank score tag", rank starting at 1.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    char buf[64];
    for (const auto& [q, entries] : data_) {
      for (std::size_t i = 0; i < entries.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", entries[i].score);
        out << q << " Q0 " << entries[i].doc_id << ' ' << (i + 1) << ' ' << buf << ' ' << tag_ << '\n';
      }
    }
  }

  /// Entries are re-sorted by their rank column.
  static Run load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open run " + path);
    std::map<std::string, std::vector<std::pair<long, RunEntry>>> rows;
    std::string tag = "run";
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::istringstream fields(line);
      std::string q, q0, d, t;
      long rank = 0;
      double score = 0;
      if (!(fields >> q >> q0 >> d >> rank >> score))
        throw Error(Errc::ParseError, path + ":" + std::to_string(line_no) + ": expected 'qid Q0 docid rank score tag'");
      if (fields >> t) tag = t;
      rows[q].push_back({rank, RunEntry{d, score}});
    }
    Run run(tag);
    for (auto& [q, entries] : rows) {
      std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<RunEntry> ranked;
      for (auto& e : entries) ranked.push_back(std::move(e.second));
      run.set(q, std::move(ranked));
    }
    return run;
  }

 private:
  std::string tag_;
  std::map<std::string, std::vector<RunEntry>> data_;
};

}  // namespace crest
