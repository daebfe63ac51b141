#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "crest/criterion.hpp"
#include "crest/error.hpp"
#include "crest/random.hpp"
#include "crest/run.hpp"
#include "crest/trouble_report.hpp"

namespace crest {

/// Knobs of the planted-signal generator. Per-criterion arrays are indexed by
/// Criterion (trouble description first).
struct SynthParams {
  std::size_t n_trs = 200;
  std::size_t criterion_vocab = 60;   // words per criterion vocabulary (disjoint across criteria)
  std::size_t background_vocab = 400;
  std::size_t signature_size = 3;     // planted words per TR and criterion
  std::size_t headline_length = 5;
  std::size_t answer_filler = 12;     // background words in each answer
  std::array<double, kCriterionCount> signal_strength{0.5, 0.5, 0.5, 0.5, 0.5};
  std::array<std::size_t, kCriterionCount> field_length{10, 6, 6, 6, 8};
  // Share of non-signal words taken from the criterion's own vocabulary
  // (the rest are background words).
  double criterion_noise_rate = 0.5;
  double missing_criterion_rate = 0.0;

  void validate() const {
    if (n_trs == 0 || criterion_vocab == 0 || background_vocab == 0)
      throw Error(Errc::InvalidArgument, "synthetic corpus sizes must be positive");
    if (signature_size == 0 || signature_size > criterion_vocab)
      throw Error(Errc::InvalidArgument, "signature_size must be in [1, criterion_vocab]");
    for (double s : signal_strength)
      if (!(s >= 0.0 && s <= 1.0)) throw Error(Errc::InvalidArgument, "signal strengths must lie in [0,1]");
    for (std::size_t len : field_length)
      if (len == 0) throw Error(Errc::InvalidArgument, "field lengths must be positive");
    if (!(missing_criterion_rate >= 0.0 && missing_criterion_rate <= 1.0) ||
        !(criterion_noise_rate >= 0.0 && criterion_noise_rate <= 1.0))
      throw Error(Errc::InvalidArgument, "rates must lie in [0,1]");
  }

  nlohmann::json to_json() const {
    return {{"n_trs", n_trs},
            {"criterion_vocab", criterion_vocab},
            {"background_vocab", background_vocab},
            {"signature_size", signature_size},
            {"headline_length", headline_length},
            {"answer_filler", answer_filler},
            {"signal_strength", signal_strength},
            {"field_length", field_length},
            {"criterion_noise_rate", criterion_noise_rate},
            {"missing_criterion_rate", missing_criterion_rate}};
  }

  static SynthParams from_json(const nlohmann::json& j) {
    SynthParams p;
    try {
      p.n_trs = j.value("n_trs", p.n_trs);
      p.criterion_vocab = j.value("criterion_vocab", p.criterion_vocab);
      p.background_vocab = j.value("background_vocab", p.background_vocab);
      p.signature_size = j.value("signature_size", p.signature_size);
      p.headline_length = j.value("headline_length", p.headline_length);
      p.answer_filler = j.value("answer_filler", p.answer_filler);
      p.signal_strength = j.value("signal_strength", p.signal_strength);
      p.field_length = j.value("field_length", p.field_length);
      p.criterion_noise_rate = j.value("criterion_noise_rate", p.criterion_noise_rate);
      p.missing_criterion_rate = j.value("missing_criterion_rate", p.missing_criterion_rate);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigInvalid, std::string("bad synth parameters: ") + e.what());
    }
    p.validate();
    return p;
  }
};

struct SyntheticCorpus {
  Corpus corpus;
  Qrels qrels;  // each TR's own answer is its only relevant document
};

namespace detail {

inline std::string synth_word(std::string_view prefix, std::size_t index) {
  std::string suffix;
  do {
    suffix.insert(suffix.begin(), static_cast<char>('a' + index % 26));
    index /= 26;
  } while (index > 0);
  return std::string(prefix) + suffix;
}

inline std::string_view synth_prefix(Criterion c) {
  constexpr std::array<std::string_view, kCriterionCount> prefixes{"desc", "imp", "cnd", "frq", "rep"};
  return prefixes[index_of(c)];
}

}  // namespace detail

/// Generates trouble reports whose answers contain a planted signature per
/// criterion. Observation fields quote their own signature with probability
/// equal to the criterion's signal strength and otherwise emit distractor
/// words, which match unrelated answers at background rate.
inline SyntheticCorpus synth_corpus(const SynthParams& params, std::uint64_t seed,
                                    const TemplateSpec& tmpl = TemplateSpec::defaults()) {
  params.validate();
  SyntheticCorpus out;
  out.corpus.reserve(params.n_trs);

  constexpr std::array<std::string_view, 3> priorities{"A", "B", "C"};
  constexpr std::array<std::string_view, 4> categories{"software", "configuration", "hardware", "documentation"};

  for (std::size_t n = 0; n < params.n_trs; ++n) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "TR%05zu", n);
    const std::string id = id_buf;
    Rng rng = stream_for(seed, id);

    auto background = [&] { return detail::synth_word("w", uniform_index(rng, params.background_vocab)); };
    auto vocab_word = [&](Criterion c) {
      return detail::synth_word(detail::synth_prefix(c), uniform_index(rng, params.criterion_vocab));
    };

    CriterionMap<std::vector<std::string>> signatures;
    for (Criterion c : kAllCriteria) {
      std::vector<std::size_t> all(params.criterion_vocab);
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      shuffle(all, rng);
      std::vector<std::string> sig;
      for (std::size_t i = 0; i < params.signature_size; ++i)
        sig.push_back(detail::synth_word(detail::synth_prefix(c), all[i]));
      signatures.set(c, std::move(sig));
    }

    auto field_text = [&](Criterion c, std::size_t length) {
      const auto& sig = signatures.at(c);
      Tokens words;
      for (std::size_t i = 0; i < length; ++i) {
        if (uniform01(rng) < params.signal_strength[index_of(c)])
          words.push_back(sig[uniform_index(rng, sig.size())]);
        else if (uniform01(rng) < params.criterion_noise_rate)
          words.push_back(vocab_word(c));
        else
          words.push_back(background());
      }
      return join(words);
    };

    CriterionMap<std::string> fields;
    for (Criterion c : kAllCriteria) {
      const bool present =
          c == Criterion::TroubleDescription || uniform01(rng) >= params.missing_criterion_rate;
      if (present) fields.set(c, field_text(c, params.field_length[index_of(c)]));
    }

    TroubleReport tr;
    tr.id = id;
    tr.headline = field_text(Criterion::TroubleDescription, params.headline_length);
    tr.observation = parse_observation(render_observation(fields, tmpl), tmpl);

    Tokens answer;
    for (Criterion c : kAllCriteria)
      for (const auto& w : signatures.at(c)) answer.push_back(w);
    for (std::size_t i = 0; i < params.answer_filler; ++i) answer.push_back(background());
    shuffle(answer, rng);
    tr.answer = join(answer) + ".";

    tr.metadata["priority"] = std::string(priorities[uniform_index(rng, priorities.size())]);
    tr.metadata["product"] = "prod-" + std::to_string(uniform_index(rng, 8));
    tr.metadata["fault_category"] = std::string(categories[uniform_index(rng, categories.size())]);

    out.qrels.add(tr.id, tr.id, 1);
    out.corpus.push_back(std::move(tr));
  }
  return out;
}

}  // namespace crest
