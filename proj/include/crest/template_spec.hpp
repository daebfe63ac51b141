#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/criterion.hpp"
#include "crest/error.hpp"

namespace crest {

/// Header aliases per criterion for the observation template.
///
/// File format (JSON): an object keyed by criterion name, each value a list
/// of header strings. Matching is ASCII case-insensitive; the first alias of
/// each criterion is the canonical header used when rendering.
///
///     { "impact": ["Impact:", "Impact on system:", "System impact:"], ... }
class TemplateSpec {
 public:
  static TemplateSpec defaults() {
    TemplateSpec t;
    t.aliases_[index_of(Criterion::TroubleDescription)] = {"Trouble description:", "Problem description:",
                                                          "Description:"};
    t.aliases_[index_of(Criterion::Impact)] = {"Impact:", "Impact on system:", "System impact:"};
    t.aliases_[index_of(Criterion::Condition)] = {"Condition:", "Conditions:", "Preconditions:"};
    t.aliases_[index_of(Criterion::Frequency)] = {"Frequency:", "How often:"};
    t.aliases_[index_of(Criterion::Reproducibility)] = {"Steps to reproduce:", "Reproducibility:",
                                                       "How to reproduce:"};
    return t;
  }

  const std::vector<std::string>& aliases(Criterion c) const { return aliases_[index_of(c)]; }
  const std::string& canonical_header(Criterion c) const { return aliases_[index_of(c)].front(); }

  void set_aliases(Criterion c, std::vector<std::string> headers) {
    if (headers.empty()) throw Error(Errc::InvalidArgument, "criterion needs at least one header alias");
    for (const auto& h : headers)
      if (h.empty()) throw Error(Errc::InvalidArgument, "empty header alias");
    aliases_[index_of(c)] = std::move(headers);
  }

  struct Alias {
    std::string lowered;
    Criterion criterion;
  };

  /// All aliases lowercased, longest first, so "System impact:" wins over "Impact:".
  std::vector<Alias> match_table() const {
    std::vector<Alias> table;
    for (Criterion c : kAllCriteria) {
      for (const auto& a : aliases(c)) {
        std::string lowered = a;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        table.push_back({std::move(lowered), c});
      }
    }
    std::stable_sort(table.begin(), table.end(),
                     [](const Alias& a, const Alias& b) { return a.lowered.size() > b.lowered.size(); });
    return table;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (Criterion c : kAllCriteria) j[std::string(name_of(c))] = aliases(c);
    return j;
  }

  static TemplateSpec from_json(const nlohmann::json& j) {
    TemplateSpec t = defaults();
    if (!j.is_object()) throw Error(Errc::ParseError, "template spec must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto c = criterion_from_string(key);
      if (!c) throw Error(Errc::ParseError, "unknown criterion in template spec: " + key);
      t.set_aliases(*c, value.get<std::vector<std::string>>());
    }
    return t;
  }

  static TemplateSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open template spec " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + ": " + e.what());
    }
  }

 private:
  std::array<std::vector<std::string>, kCriterionCount> aliases_;
};

}  // namespace crest
