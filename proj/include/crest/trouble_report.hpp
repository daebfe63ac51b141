#pragma once

#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/criterion.hpp"
#include "crest/error.hpp"
#include "crest/hash.hpp"
#include "crest/observation.hpp"

namespace crest {

struct TroubleReport {
  std::string id;
  std::string headline;
  Observation observation;
  std::string answer;
  std::map<std::string, std::string> metadata;  // priority, product, fault_category, ...
};

using Corpus = std::vector<TroubleReport>;

/// Delimiter placed between concatenated query fields.
inline constexpr std::string_view kFieldSeparator = " | ";

/// Headline followed by the requested criteria that are present, joined by
/// the field separator.
inline std::string compose_query(const TroubleReport& tr, std::span<const Criterion> fields) {
  std::string out = std::string(trim(tr.headline));
  for (Criterion c : fields) {
    const auto& text = tr.observation.text(c);
    if (!text) continue;
    if (!out.empty()) out += kFieldSeparator;
    out += *text;
  }
  return out;
}

/// Per-criterion queries for one trouble report.
struct QueryBundle {
  std::string base;                          // headline + trouble description
  CriterionMap<std::string> per_criterion;   // base + criterion text
  CriterionSet active;                       // requested ∩ present
  CriterionSet missing;                      // requested but absent
  std::string full;                          // headline + description + active criteria

  /// Criteria that get their own model for this bundle.
  CriterionSet model_criteria() const { return active.without(Criterion::TroubleDescription); }
};

inline QueryBundle build_query_bundle(const TroubleReport& tr, CriterionSet requested) {
  constexpr std::array<Criterion, 1> description{Criterion::TroubleDescription};
  QueryBundle b;
  b.base = compose_query(tr, description);
  if (b.base.empty())
    throw Error(Errc::MissingTroubleDescription, "trouble report '" + tr.id + "' has no headline or description");

  const CriterionSet present = tr.observation.present();
  b.active = requested & present;
  for (Criterion c : requested.to_vector())
    if (!present.contains(c)) b.missing.insert(c);

  for (Criterion c : b.model_criteria().to_vector()) {
    b.per_criterion.set(c, b.base + std::string(kFieldSeparator) + *tr.observation.text(c));
  }
  std::vector<Criterion> full_fields{Criterion::TroubleDescription};
  for (Criterion c : b.model_criteria().to_vector()) full_fields.push_back(c);
  b.full = compose_query(tr, full_fields);
  return b;
}

// --- corpus files -----------------------------------------------------------
//
// One JSON object per line:
//   {"id": "...", "headline": "...", "observation_raw": "...",
//    "answer": "...", "metadata": {"priority": "B", ...}}

inline nlohmann::json tr_to_json(const TroubleReport& tr) {
  return nlohmann::json{{"id", tr.id},
                        {"headline", tr.headline},
                        {"observation_raw", tr.observation.raw},
                        {"answer", tr.answer},
                        {"metadata", tr.metadata}};
}

inline TroubleReport tr_from_json(const nlohmann::json& j, const TemplateSpec& tmpl) {
  TroubleReport tr;
  try {
    tr.id = j.at("id").get<std::string>();
    tr.headline = j.value("headline", std::string{});
    tr.observation = parse_observation(j.value("observation_raw", std::string{}), tmpl);
    tr.answer = j.value("answer", std::string{});
    if (j.contains("metadata")) tr.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("bad trouble report record: ") + e.what());
  }
  if (tr.id.empty()) throw Error(Errc::ParseError, "trouble report with empty id");
  return tr;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  for (const auto& tr : corpus) out << tr_to_json(tr).dump() << '\n';
}

inline Corpus load_corpus(const std::string& path, const TemplateSpec& tmpl = TemplateSpec::defaults()) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open corpus " + path);
  Corpus corpus;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto tr = tr_from_json(j, tmpl);
    if (!seen.insert(tr.id).second) throw Error(Errc::ParseError, "duplicate trouble report id " + tr.id);
    corpus.push_back(std::move(tr));
  }
  return corpus;
}

/// Fingerprint of the document side of a corpus (ids and answers, in order).
inline std::string corpus_hash(const Corpus& corpus) {
  Fingerprint fp;
  fp.add(static_cast<std::uint64_t>(corpus.size()));
  for (const auto& tr : corpus) fp.add(tr.id).add(tr.answer);
  return fp.hex();
}

}  // namespace crest
