#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/error.hpp"
#include "crest/run.hpp"

namespace crest {

struct CalibrationSample {
  double confidence = 0.0;  // softmax probability of the rank-1 document
  bool correct = false;     // rank-1 document is relevant
};

struct ClassificationResult {
  std::vector<CalibrationSample> samples;
  std::vector<std::string> skipped;  // queries with fewer than `top` scored documents
};

/// Softmax (temperature 1, max-subtracted) over the given raw scores.
inline std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double hi = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += (p[i] = std::exp(scores[i] - hi));
  for (double& x : p) x /= z;
  return p;
}

/// Turns each ranking into a `top`-way classification: the predicted class is
/// the rank-1 document, its confidence the softmax mass over the top scores.
inline ClassificationResult to_classification(const Run& run, const Qrels& qrels, std::size_t top = 5) {
  ClassificationResult out;
  for (const auto& [q, entries] : run.data()) {
    if (entries.size() < top || top == 0) {
      out.skipped.push_back(q);
      continue;
    }
    std::vector<double> scores;
    for (std::size_t i = 0; i < top; ++i) scores.push_back(entries[i].score);
    const auto probs = softmax(scores);
    out.samples.push_back({probs[0], qrels.is_relevant(q, entries[0].doc_id)});
  }
  return out;
}

struct BinStats {
  std::size_t index = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;

  nlohmann::json to_json() const {
    return {{"bin", index},           {"lower", lower},       {"upper", upper},
            {"count", count},         {"confidence", mean_confidence}, {"accuracy", accuracy}};
  }
};

/// Bin m of M covers (m/M, (m+1)/M]; the first bin also takes 0.
inline std::size_t bin_of(double confidence, std::size_t bins) {
  if (confidence <= 0.0) return 0;
  const auto m = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(bins)));
  return std::clamp<std::size_t>(m, 1, bins) - 1;
}

inline std::vector<BinStats> reliability_diagram(std::span<const CalibrationSample> samples, std::size_t bins = 10) {
  if (samples.empty()) throw Error(Errc::EmptySamples, "no calibration samples");
  if (bins == 0) throw Error(Errc::InvalidArgument, "need at least one bin");
  std::vector<BinStats> out(bins);
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::size_t> hits(bins, 0);
  for (std::size_t m = 0; m < bins; ++m) {
    out[m].index = m;
    out[m].lower = static_cast<double>(m) / static_cast<double>(bins);
    out[m].upper = static_cast<double>(m + 1) / static_cast<double>(bins);
  }
  for (const auto& s : samples) {
    const std::size_t m = bin_of(s.confidence, bins);
    ++out[m].count;
    conf_sum[m] += s.confidence;
    hits[m] += s.correct;
  }
  for (std::size_t m = 0; m < bins; ++m) {
    if (out[m].count == 0) continue;
    out[m].mean_confidence = conf_sum[m] / static_cast<double>(out[m].count);
    out[m].accuracy = static_cast<double>(hits[m]) / static_cast<double>(out[m].count);
  }
  return out;
}

/// Expected calibration error: sum over bins of |B_m|/n * |acc(B_m) - conf(B_m)|.
inline double ece(std::span<const CalibrationSample> samples, std::size_t bins = 10) {
  const auto diagram = reliability_diagram(samples, bins);
  const double n = static_cast<double>(samples.size());
  double total = 0.0;
  for (const auto& b : diagram)
    if (b.count) total += (static_cast<double>(b.count) / n) * std::abs(b.accuracy - b.mean_confidence);
  return total;
}

inline std::string render_reliability(const std::vector<BinStats>& diagram) {
  std::string out = "bin  range        count  confidence  accuracy\n";
  char buf[128];
  for (const auto& b : diagram) {
    std::snprintf(buf, sizeof buf, "%-4zu (%.2f,%.2f]  %5zu  %10.4f  %8.4f\n", b.index, b.lower, b.upper, b.count,
                  b.mean_confidence, b.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace crest
