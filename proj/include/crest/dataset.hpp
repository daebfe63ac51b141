#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "crest/criterion.hpp"
#include "crest/error.hpp"
#include "crest/hash.hpp"
#include "crest/random.hpp"
#include "crest/trouble_report.hpp"

namespace crest {

/// Which trouble reports a dataset draws from and how queries are composed.
struct DatasetSpec {
  std::string name;
  std::optional<Criterion> required;
  std::vector<Criterion> query_fields;  // the headline is always prepended

  /// HTx: headline + trouble description + criterion x.
  static DatasetSpec for_criterion(Criterion c) {
    return {std::string("HT") + letter_of(c), c, {Criterion::TroubleDescription, c}};
  }
  /// Same TR set as HTx, query without criterion x.
  static DatasetSpec baseline(Criterion c) {
    return {std::string("HT") + letter_of(c) + "-baseline", c, {Criterion::TroubleDescription}};
  }
  /// Criterion-agnostic model: every TR, whole observation as one query.
  static DatasetSpec single_model() {
    return {"SingleModel", std::nullopt, {kAllCriteria.begin(), kAllCriteria.end()}};
  }

  static DatasetSpec from_name(const std::string& name) {
    if (name == "SingleModel" || name == "single") return single_model();
    if (name.size() >= 3 && name.starts_with("HT")) {
      const auto c = criterion_from_string(name.substr(2, 1));
      if (c && *c != Criterion::TroubleDescription) {
        if (name.size() == 3) return for_criterion(*c);
        if (name.substr(3) == "-baseline") return baseline(*c);
      }
    }
    throw Error(Errc::InvalidArgument, "unknown dataset '" + name + "'");
  }

  /// All nine datasets: four criterion, four baselines, single model.
  static std::vector<DatasetSpec> standard() {
    std::vector<DatasetSpec> out;
    for (Criterion c : kModelCriteria) out.push_back(for_criterion(c));
    for (Criterion c : kModelCriteria) out.push_back(baseline(c));
    out.push_back(single_model());
    return out;
  }

  bool accepts(const TroubleReport& tr) const { return !required || tr.observation.has(*required); }

  CriterionSet fields() const {
    CriterionSet s;
    for (Criterion c : query_fields) s.insert(c);
    return s;
  }
};

struct SplitPlan {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  std::string fingerprint() const {
    Fingerprint fp;
    for (const auto* part : {&train, &validation, &test}) {
      fp.add(static_cast<std::uint64_t>(part->size()));
      for (const auto& id : *part) fp.add(id);
    }
    return fp.hex();
  }

  nlohmann::json to_json() const {
    return {{"train", train}, {"validation", validation}, {"test", test}, {"seed", seed},
            {"fingerprint", fingerprint()}};
  }
  static SplitPlan from_json(const nlohmann::json& j) {
    SplitPlan s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
  }
};

inline bool has_all_criteria(const TroubleReport& tr) { return tr.observation.present() == CriterionSet::all(); }

/// Validation and test are drawn only from TRs carrying all five criteria;
/// everything else is train. Id lists come back sorted.
inline SplitPlan make_splits(const Corpus& corpus, std::size_t val_size, std::size_t test_size, std::uint64_t seed) {
  std::vector<std::string> eligible;
  for (const auto& tr : corpus)
    if (has_all_criteria(tr)) eligible.push_back(tr.id);
  if (val_size + test_size > eligible.size())
    throw Error(Errc::InsufficientFullCriteriaTRs, "need " + std::to_string(val_size + test_size) +
                                                       " all-criteria TRs, corpus has " +
                                                       std::to_string(eligible.size()));
  std::sort(eligible.begin(), eligible.end());
  Rng rng{mix64(seed)};
  shuffle(eligible, rng);

  SplitPlan plan;
  plan.seed = seed;
  plan.validation.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(val_size));
  plan.test.assign(eligible.begin() + static_cast<std::ptrdiff_t>(val_size),
                   eligible.begin() + static_cast<std::ptrdiff_t>(val_size + test_size));
  const std::set<std::string> held(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(val_size + test_size));
  for (const auto& tr : corpus)
    if (!held.contains(tr.id)) plan.train.push_back(tr.id);
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.validation.begin(), plan.validation.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

enum class PairLabel { Relevant, Irrelevant };

struct TrainingPair {
  std::string query;
  std::string document;
  PairLabel label;
  std::string source_tr;    // TR the query came from
  std::string document_tr;  // TR the document came from
  CriterionSet criteria;

  bool operator==(const TrainingPair&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<TrainingPair> pairs;

  std::size_t count(PairLabel label) const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [&](const TrainingPair& p) { return p.label == label; }));
  }

  std::set<std::string> source_ids() const {
    std::set<std::string> ids;
    for (const auto& p : pairs) ids.insert(p.source_tr);
    return ids;
  }
};

/// One relevant and one irrelevant pair per qualifying training TR. The
/// negative is another qualifying TR's answer drawn uniformly from a stream
/// keyed by (seed, TR id), so `threads` never changes the result.
inline Dataset build_dataset(const Corpus& corpus, const DatasetSpec& spec, const SplitPlan& split,
                             std::uint64_t seed, unsigned threads = 1) {
  const std::set<std::string> train(split.train.begin(), split.train.end());
  std::vector<const TroubleReport*> pool;
  for (const auto& tr : corpus) {
    if (!train.contains(tr.id) || !spec.accepts(tr)) continue;
    if (trim(tr.answer).empty() || compose_query(tr, spec.query_fields).empty()) continue;
    pool.push_back(&tr);
  }
  if (pool.empty()) throw Error(Errc::EmptyDataset, "no training TR qualifies for " + spec.name);

  std::vector<std::vector<TrainingPair>> slots(pool.size());
  auto work = [&](std::size_t i) {
    const TroubleReport& tr = *pool[i];
    if (pool.size() < 2) return;
    Rng rng = stream_for(seed, tr.id);
    const TroubleReport* negative = nullptr;
    for (std::size_t attempt = 0; attempt < 8 * pool.size() && !negative; ++attempt) {
      std::size_t j = static_cast<std::size_t>(uniform_index(rng, pool.size() - 1));
      if (j >= i) ++j;
      if (pool[j]->answer != tr.answer) negative = pool[j];
    }
    if (!negative) return;
    const std::string query = compose_query(tr, spec.query_fields);
    const CriterionSet used = spec.fields() & tr.observation.present();
    slots[i].push_back({query, tr.answer, PairLabel::Relevant, tr.id, tr.id, used});
    slots[i].push_back({query, negative->answer, PairLabel::Irrelevant, tr.id, negative->id, used});
  };

  const unsigned n_threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(pool.size())));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < pool.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < n_threads; ++t)
      workers.emplace_back([&, t] {
        for (std::size_t i = t; i < pool.size(); i += n_threads) work(i);
      });
  }

  Dataset ds{spec.name, {}};
  for (auto& s : slots)
    for (auto& p : s) ds.pairs.push_back(std::move(p));
  if (ds.pairs.empty()) throw Error(Errc::EmptyDataset, "no negative could be drawn for " + spec.name);
  return ds;
}

// --- dataset files ------------------------------------------------------------
// One JSON object per line: {"query", "document", "label": "relevant"|"irrelevant",
//  "source_tr", "document_tr", "criteria": [...]}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  for (const auto& p : ds.pairs) {
    nlohmann::json j{{"query", p.query},
                     {"document", p.document},
                     {"label", p.label == PairLabel::Relevant ? "relevant" : "irrelevant"},
                     {"source_tr", p.source_tr},
                     {"document_tr", p.document_tr},
                     {"criteria", p.criteria.names()}};
    out << j.dump() << '\n';
  }
}

inline Dataset load_dataset(const std::string& path, std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open dataset " + path);
  Dataset ds{std::move(name), {}};
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ds.pairs.push_back({j.at("query").get<std::string>(), j.at("document").get<std::string>(),
                          j.at("label").get<std::string>() == "relevant" ? PairLabel::Relevant : PairLabel::Irrelevant,
                          j.at("source_tr").get<std::string>(), j.value("document_tr", std::string{}),
                          CriterionSet::from_names(j.value("criteria", std::vector<std::string>{}))});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + ": " + e.what());
    }
  }
  return ds;
}

struct Triple {
  std::string query;
  std::string positive;
  std::string negative;
};

/// Pairs each relevant pair with the irrelevant pair(s) of the same source TR.
inline std::vector<Triple> to_triples(const Dataset& ds) {
  std::map<std::string, std::pair<std::vector<const TrainingPair*>, std::vector<const TrainingPair*>>> by_source;
  std::vector<std::string> order;
  for (const auto& p : ds.pairs) {
    auto [it, inserted] = by_source.try_emplace(p.source_tr);
    if (inserted) order.push_back(p.source_tr);
    (p.label == PairLabel::Relevant ? it->second.first : it->second.second).push_back(&p);
  }
  std::vector<Triple> out;
  for (const auto& id : order) {
    const auto& [pos, neg] = by_source.at(id);
    for (const auto* p : pos)
      for (const auto* n : neg) out.push_back({p->query, p->document, n->document});
  }
  return out;
}

}  // namespace crest
