#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/error.hpp"
#include "crest/run.hpp"

namespace crest {

namespace detail {

inline void require_qrels(const Run& run, const Qrels& qrels) {
  for (const auto& [q, entries] : run.data())
    if (!qrels.has_query(q)) throw Error(Errc::MissingQrels, "run query " + q + " has no judgments");
}

}  // namespace detail

/// Reciprocal rank of the first relevant document, 0 when none is retrieved.
inline double reciprocal_rank(const std::vector<RunEntry>& ranking, const std::string& query, const Qrels& qrels) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (qrels.is_relevant(query, ranking[i].doc_id)) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

inline double mrr(const Run& run, const Qrels& qrels) {
  detail::require_qrels(run, qrels);
  if (run.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [q, entries] : run.data()) total += reciprocal_rank(entries, q, qrels);
  return total / static_cast<double>(run.size());
}

/// Mean over queries of the share of relevant documents found in the top k.
inline double recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  detail::require_qrels(run, qrels);
  if (run.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [q, entries] : run.data()) {
    const std::size_t relevant = qrels.relevant_count(q);
    if (relevant == 0) continue;
    std::size_t found = 0;
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) found += qrels.is_relevant(q, entries[i].doc_id);
    total += static_cast<double>(found) / static_cast<double>(relevant);
  }
  return total / static_cast<double>(run.size());
}

/// nDCG@k with gain 2^rel - 1 and discount log2(rank + 1). Queries whose
/// ideal DCG is zero contribute 0 and are listed in `zero_ideal` if given.
inline double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                        std::vector<std::string>* zero_ideal = nullptr) {
  detail::require_qrels(run, qrels);
  if (run.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [q, entries] : run.data()) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
      const int rel = qrels.relevance(q, entries[i].doc_id);
      if (rel > 0) dcg += (std::exp2(rel) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    for (const auto& [doc, rel] : qrels.judgments(q))
      if (rel > 0) ideal.push_back(rel);
    std::sort(ideal.rbegin(), ideal.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
      idcg += (std::exp2(ideal[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    if (idcg == 0.0) {
      if (zero_ideal) zero_ideal->push_back(q);
      continue;
    }
    total += dcg / idcg;
  }
  return total / static_cast<double>(run.size());
}

/// Difference between a criterion model and its baseline, in the units of
/// the inputs.
inline double impact_score(double p_criterion, double p_baseline) { return p_criterion - p_baseline; }

struct MetricReport {
  std::string descriptor;        // configuration name
  std::string split;             // provenance of the evaluated queries
  std::size_t query_count = 0;
  std::vector<std::pair<std::string, double>> values;  // in [0,1]

  std::optional<double> get(const std::string& metric) const {
    for (const auto& [name, v] : values)
      if (name == metric) return v;
    return std::nullopt;
  }

  nlohmann::json to_json() const {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [name, v] : values) metrics[name] = v;
    return {{"descriptor", descriptor},
            {"split", split},
            {"query_count", query_count},
            {"metrics", metrics},
            {"ndcg_convention", "gain 2^rel-1, discount log2(rank+1)"}};
  }
};

inline const std::vector<std::string>& default_metrics() {
  static const std::vector<std::string> names{"MRR", "R@5", "R@10", "R@15", "nDCG@15"};
  return names;
}

inline MetricReport evaluate(const Run& run, const Qrels& qrels, std::string descriptor, std::string split = {}) {
  MetricReport r{std::move(descriptor), std::move(split), run.size(), {}};
  r.values.emplace_back("MRR", mrr(run, qrels));
  r.values.emplace_back("R@5", recall_at_k(run, qrels, 5));
  r.values.emplace_back("R@10", recall_at_k(run, qrels, 10));
  r.values.emplace_back("R@15", recall_at_k(run, qrels, 15));
  r.values.emplace_back("nDCG@15", ndcg_at_k(run, qrels, 15));
  return r;
}

/// Per-metric impact in percentage points. Both reports must come from the
/// same evaluation split.
inline std::vector<std::pair<std::string, double>> impact_scores(const MetricReport& criterion,
                                                                 const MetricReport& baseline) {
  if (criterion.split != baseline.split)
    throw Error(Errc::SplitMismatch, "'" + criterion.descriptor + "' evaluated on " + criterion.split + ", '" +
                                         baseline.descriptor + "' on " + baseline.split);
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, v] : criterion.values)
    if (auto b = baseline.get(name)) out.emplace_back(name, 100.0 * impact_score(v, *b));
  return out;
}

// --- tables ---------------------------------------------------------------------

struct Table {
  std::string title;
  std::vector<std::string> columns;  // first column is the row label
  struct Row {
    std::string label;
    std::vector<double> values;
    std::vector<std::optional<double>> deltas;  // rendered in parentheses
  };
  std::vector<Row> rows;
  bool bold_by_row = true;  // highlight the max of each row (else of each column)
  bool percent = true;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json d = nlohmann::json::array();
      for (const auto& x : r.deltas) d.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
      rs.push_back({{"label", r.label}, {"values", r.values}, {"deltas", d}});
    }
    return {{"title", title}, {"columns", columns}, {"rows", rs}, {"bold_by_row", bold_by_row}};
  }

  bool is_bold(std::size_t row, std::size_t col) const {
    const double v = rows[row].values[col];
    if (bold_by_row) {
      for (double x : rows[row].values)
        if (x > v) return false;
      return true;
    }
    for (const auto& r : rows)
      if (col < r.values.size() && r.values[col] > v) return false;
    return true;
  }

  /// Aligned plain text; bold maxima are marked with '*'.
  std::string render() const {
    std::vector<std::vector<std::string>> cells;
    cells.push_back(columns);
    char buf[64];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::vector<std::string> line{rows[i].label};
      for (std::size_t j = 0; j < rows[i].values.size(); ++j) {
        const double v = percent ? 100.0 * rows[i].values[j] : rows[i].values[j];
        std::snprintf(buf, sizeof buf, percent ? "%.2f" : "%.4f", v);
        std::string cell = buf;
        if (j < rows[i].deltas.size() && rows[i].deltas[j]) {
          std::snprintf(buf, sizeof buf, " (%+.2f)", *rows[i].deltas[j]);
          cell += buf;
        }
        if (is_bold(i, j)) cell += "*";
        line.push_back(std::move(cell));
      }
      cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width;
    for (const auto& line : cells)
      for (std::size_t j = 0; j < line.size(); ++j) {
        if (width.size() <= j) width.push_back(0);
        width[j] = std::max(width[j], line[j].size());
      }
    std::string out = title.empty() ? "" : title + "\n";
    for (const auto& line : cells) {
      for (std::size_t j = 0; j < line.size(); ++j) {
        out += line[j];
        if (j + 1 < line.size()) out += std::string(width[j] - line[j].size() + 2, ' ');
      }
      out += '\n';
    }
    return out;
  }
};

/// Metrics as rows, configurations as columns; max per row marked.
inline Table comparison_table(const std::vector<MetricReport>& reports, std::string title = {}) {
  Table t;
  t.title = std::move(title);
  t.columns.push_back("Metric");
  for (const auto& r : reports) t.columns.push_back(r.descriptor);
  std::vector<std::string> names;
  if (reports.empty()) names = default_metrics();
  else
    for (const auto& [name, v] : reports.front().values) names.push_back(name);
  for (const auto& m : names) {
    Table::Row row{m, {}, {}};
    for (const auto& r : reports) row.values.push_back(r.get(m).value_or(0.0));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Configurations as rows, metrics as columns, deltas to the first row in
/// percentage points; max per column marked.
inline Table ablation_table(const std::vector<MetricReport>& reports, std::string title = {}) {
  Table t;
  t.title = std::move(title);
  t.bold_by_row = false;
  t.columns.push_back("Config");
  if (reports.empty()) return t;
  for (const auto& [name, v] : reports.front().values) t.columns.push_back(name);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    Table::Row row{reports[i].descriptor, {}, {}};
    for (const auto& [name, v] : reports.front().values) {
      const double value = reports[i].get(name).value_or(0.0);
      row.values.push_back(value);
      row.deltas.push_back(i == 0 ? std::nullopt : std::optional<double>(100.0 * (value - v)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Rows = criteria, columns = metrics, cells = impact in points.
inline Table impact_table(const std::vector<std::pair<MetricReport, MetricReport>>& pairs, std::string title = {}) {
  Table t;
  t.title = std::move(title);
  t.percent = false;
  t.bold_by_row = false;
  t.columns.push_back("Criterion");
  if (pairs.empty()) return t;
  for (const auto& [name, v] : pairs.front().first.values) t.columns.push_back(name);
  for (const auto& [crit, base] : pairs) {
    Table::Row row{crit.descriptor, {}, {}};
    for (const auto& [name, impact] : impact_scores(crit, base)) row.values.push_back(impact);
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct TableSet {
  std::vector<Table> tables;

  std::string render() const {
    std::string out;
    for (const auto& t : tables) out += t.render() + "\n";
    return out;
  }
  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& t : tables) j.push_back(t.to_json());
    return j;
  }
};

/// Evaluates every named run and lays the results out. Criterion runs named
/// "HTx" are paired with "HTx-baseline" for impact scores; runs named
/// "w/o ..." are shown as an ablation against "CREST" when present.
inline TableSet evaluate_matrix(const std::vector<std::pair<std::string, const Run*>>& runs, const Qrels& qrels,
                                const std::string& split = "test") {
  TableSet set;
  std::vector<MetricReport> reports;
  for (const auto& [name, run] : runs) reports.push_back(evaluate(*run, qrels, name, split));
  set.tables.push_back(comparison_table(reports, "Retrieval performance"));

  auto find = [&](const std::string& name) -> const MetricReport* {
    for (const auto& r : reports)
      if (r.descriptor == name) return &r;
    return nullptr;
  };

  std::vector<std::pair<MetricReport, MetricReport>> impacts;
  for (const auto& r : reports)
    if (const auto* b = find(r.descriptor + "-baseline")) impacts.emplace_back(r, *b);
  if (!impacts.empty()) set.tables.push_back(impact_table(impacts, "Impact score (points)"));

  std::vector<MetricReport> ablation;
  for (const auto& r : reports)
    if (r.descriptor.starts_with("w/o ")) ablation.push_back(r);
  if (!ablation.empty()) {
    const auto* all = find("CREST");
    if (all) {
      ablation.insert(ablation.begin(), *all);
      ablation.front().descriptor = "CREST (All)";
    }
    set.tables.push_back(ablation_table(ablation, "Ablation"));
  }
  return set;
}

}  // namespace crest
