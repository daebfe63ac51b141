#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crest/criterion.hpp"
#include "crest/template_spec.hpp"
#include "crest/text.hpp"

namespace crest {

enum class DiagnosticKind {
  EmptyObservation,   // nothing but whitespace
  EmptyField,         // header present, body empty
  MergedField,        // header found mid-line, split there
  DuplicateHeader,    // same criterion twice, bodies concatenated
  ResidueFolded,      // text before the first header became the trouble description
  UnassignedResidue,  // text before the first header kept aside (explicit description header exists)
};

inline std::string_view diagnostic_name(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::EmptyObservation: return "EmptyObservation";
    case DiagnosticKind::EmptyField: return "EmptyField";
    case DiagnosticKind::MergedField: return "MergedField";
    case DiagnosticKind::DuplicateHeader: return "DuplicateHeader";
    case DiagnosticKind::ResidueFolded: return "ResidueFolded";
    case DiagnosticKind::UnassignedResidue: return "UnassignedResidue";
  }
  return "Unknown";
}

struct Diagnostic {
  DiagnosticKind kind;
  std::optional<Criterion> criterion;

  bool operator==(const Diagnostic&) const = default;

  std::string to_string() const {
    std::string s(diagnostic_name(kind));
    if (criterion) s += "(" + std::string(name_of(*criterion)) + ")";
    return s;
  }
};

/// A matched header and the raw text that follows it up to the next header.
struct Segment {
  Criterion criterion;
  std::string header;
  std::string body;
  bool merged = false;
};

struct Observation {
  CriterionMap<std::string> criteria;
  std::string raw;
  // Raw text before the first header. residue + headers + bodies == raw.
  std::string residue;
  std::vector<Segment> segments;
  std::vector<Diagnostic> diagnostics;

  bool has(Criterion c) const { return criteria.has(c); }
  const std::optional<std::string>& text(Criterion c) const { return criteria[c]; }
  CriterionSet present() const { return criteria.present(); }

  bool has_diagnostic(DiagnosticKind kind, std::optional<Criterion> c = std::nullopt) const {
    for (const auto& d : diagnostics)
      if (d.kind == kind && (!c || d.criterion == c)) return true;
    return false;
  }
};

namespace detail {

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Non-ASCII bytes count as word characters so a header never matches inside
// a word written in another script.
inline bool word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

struct HeaderHit {
  std::size_t begin;
  std::size_t end;
  Criterion criterion;
  bool merged;
};

inline std::vector<HeaderHit> find_headers(std::string_view raw, const TemplateSpec& tmpl) {
  const auto table = tmpl.match_table();
  std::vector<HeaderHit> hits;
  std::size_t line_begin = 0;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] == '\n') {
      line_begin = ++i;
      continue;
    }
    if (i > 0 && word_byte(raw[i - 1]) && word_byte(raw[i])) {
      ++i;
      continue;
    }
    const TemplateSpec::Alias* found = nullptr;
    for (const auto& alias : table) {
      const std::size_t n = alias.lowered.size();
      if (i + n > raw.size()) continue;
      bool eq = true;
      for (std::size_t k = 0; k < n && eq; ++k) eq = ascii_lower(raw[i + k]) == alias.lowered[k];
      if (!eq) continue;
      if (word_byte(alias.lowered.back()) && i + n < raw.size() && word_byte(raw[i + n])) continue;
      found = &alias;
      break;
    }
    if (!found) {
      ++i;
      continue;
    }
    bool merged = false;
    for (std::size_t k = line_begin; k < i; ++k)
      if (std::string_view(" \t\r\f\v").find(raw[k]) == std::string_view::npos) merged = true;
    hits.push_back({i, i + found->lowered.size(), found->criterion, merged});
    i += found->lowered.size();
  }
  return hits;
}

}  // namespace detail

/// Splits a free-text observation into criteria using the template's header
/// aliases. Never throws; problems are reported through `diagnostics`.
inline Observation parse_observation(std::string_view raw, const TemplateSpec& tmpl = TemplateSpec::defaults()) {
  Observation obs;
  obs.raw = std::string(raw);
  if (trim(raw).empty()) {
    obs.residue = obs.raw;
    obs.diagnostics.push_back({DiagnosticKind::EmptyObservation, std::nullopt});
    return obs;
  }

  const auto hits = detail::find_headers(raw, tmpl);
  const std::size_t first = hits.empty() ? raw.size() : hits.front().begin;
  obs.residue = std::string(raw.substr(0, first));

  for (std::size_t h = 0; h < hits.size(); ++h) {
    const auto& hit = hits[h];
    const std::size_t body_end = h + 1 < hits.size() ? hits[h + 1].begin : raw.size();
    Segment seg{hit.criterion, std::string(raw.substr(hit.begin, hit.end - hit.begin)),
                std::string(raw.substr(hit.end, body_end - hit.end)), hit.merged};
    if (hit.merged) obs.diagnostics.push_back({DiagnosticKind::MergedField, hit.criterion});

    const std::string_view body = trim(seg.body);
    auto& slot = obs.criteria[hit.criterion];
    if (body.empty()) {
      obs.diagnostics.push_back({DiagnosticKind::EmptyField, hit.criterion});
    } else if (slot) {
      obs.diagnostics.push_back({DiagnosticKind::DuplicateHeader, hit.criterion});
      *slot += ' ';
      *slot += body;
    } else {
      slot = std::string(body);
    }
    obs.segments.push_back(std::move(seg));
  }

  const std::string_view residue = trim(obs.residue);
  if (!residue.empty()) {
    bool description_header = false;
    for (const auto& seg : obs.segments)
      if (seg.criterion == Criterion::TroubleDescription) description_header = true;
    if (description_header) {
      obs.diagnostics.push_back({DiagnosticKind::UnassignedResidue, std::nullopt});
    } else {
      obs.criteria.set(Criterion::TroubleDescription, std::string(residue));
      obs.diagnostics.push_back({DiagnosticKind::ResidueFolded, Criterion::TroubleDescription});
    }
  }
  return obs;
}

/// Canonical rendering: one "Header: text" line per present criterion, in
/// enum order, using each criterion's first alias.
inline std::string render_observation(const CriterionMap<std::string>& criteria,
                                      const TemplateSpec& tmpl = TemplateSpec::defaults()) {
  std::string out;
  for (Criterion c : kAllCriteria) {
    if (!criteria.has(c)) continue;
    out += tmpl.canonical_header(c);
    out += ' ';
    out += *criteria[c];
    out += '\n';
  }
  return out;
}

}  // namespace crest
