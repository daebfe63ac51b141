#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "crest/dataset.hpp"
#include "crest/ensemble.hpp"
#include "crest/experiment.hpp"
#include "crest/index.hpp"
#include "crest/pipeline.hpp"
#include "crest/run.hpp"
#include "crest/template_spec.hpp"
#include "crest/train.hpp"

namespace crest {

inline constexpr std::string_view kVersion = "1.0.0";

// Run directory layout:
//   manifest.json           seeds, versions, corpus hash, produced files
//   corpus.jsonl  qrels.txt  splits.json  template.json (optional)
//   datasets/<name>.jsonl
//   index.json
//   models/<arch>-<dataset>.json
//   weights/<stage>-<arch>.json
//   pipeline.json
//   runs/<name>.trec  runs/<name>.breakdown.jsonl
//   reports/...
class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::string& rel) const { return root_ / rel; }
  bool has(const std::string& rel) const { return std::filesystem::exists(path(rel)); }

  std::filesystem::path corpus() const { return path("corpus.jsonl"); }
  std::filesystem::path qrels() const { return path("qrels.txt"); }
  std::filesystem::path splits() const { return path("splits.json"); }
  std::filesystem::path index() const { return path("index.json"); }
  std::filesystem::path pipeline() const { return path("pipeline.json"); }
  std::filesystem::path dataset(const std::string& name) const { return path("datasets/" + name + ".jsonl"); }
  std::filesystem::path model(Architecture a, const std::string& dataset) const {
    return path("models/" + std::string(architecture_name(a)) + "-" + dataset + ".json");
  }
  std::filesystem::path weights(Stage s, const std::string& arch) const {
    return path("weights/" + std::string(stage_name(s)) + "-" + arch + ".json");
  }
  std::filesystem::path run(const std::string& name) const { return path("runs/" + file_stem(name) + ".trec"); }
  std::filesystem::path breakdown(const std::string& name) const {
    return path("runs/" + file_stem(name) + ".breakdown.jsonl");
  }
  std::filesystem::path report(const std::string& name) const { return path("reports/" + file_stem(name) + ".json"); }

  void ensure(const std::filesystem::path& file) const {
    std::filesystem::create_directories(file.parent_path());
  }

  TemplateSpec template_spec() const {
    return has("template.json") ? TemplateSpec::load(path("template.json").string()) : TemplateSpec::defaults();
  }

  nlohmann::json manifest() const {
    if (!has("manifest.json")) return {{"tool", "crest"}, {"version", kVersion}, {"steps", nlohmann::json::array()}};
    std::ifstream in(path("manifest.json"));
    return nlohmann::json::parse(in);
  }

  /// Appends one step record (command, seeds, outputs) to the manifest.
  void record(const std::string& command, nlohmann::json details) const {
    auto m = manifest();
    m["version"] = kVersion;
    if (std::filesystem::exists(corpus())) m["corpus_hash"] = crest::corpus_hash(load_corpus(corpus().string(), template_spec()));
    details["command"] = command;
    m["steps"].push_back(std::move(details));
    std::filesystem::create_directories(root_);
    std::ofstream out(path("manifest.json"), std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write manifest in " + root_.string());
    out << m.dump(1) << '\n';
  }

  /// "w/o I" -> "wo-I"
  static std::string file_stem(const std::string& name) {
    std::string out;
    for (char c : name) {
      if (c == '/') continue;
      out += (c == ' ') ? '-' : c;
    }
    return out;
  }

 private:
  std::filesystem::path root_;
};

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + file.string());
  out << j.dump(1) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::IoError, "cannot open " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, file.string() + ": " + e.what());
  }
}

inline void save_splits(const SplitPlan& plan, const std::filesystem::path& file) { write_json(file, plan.to_json()); }
inline SplitPlan load_splits(const std::filesystem::path& file) { return SplitPlan::from_json(read_json(file)); }

/// Saves every trained piece of an experiment into the run directory.
inline void save_experiment(const Experiment& ex, const RunDir& dir) {
  std::filesystem::create_directories(dir.root());
  save_corpus(ex.corpus, dir.corpus().string());
  ex.qrels.save(dir.qrels().string());
  save_splits(ex.split, dir.splits());
  for (const auto& [name, ds] : ex.datasets) {
    dir.ensure(dir.dataset(name));
    save_dataset(ds, dir.dataset(name).string());
  }
  ex.index->save(dir.index().string());
  for (const auto& [name, m] : ex.bi_models) {
    dir.ensure(dir.model(Architecture::Bi, name));
    m.save(dir.model(Architecture::Bi, name).string());
  }
  for (const auto& [name, m] : ex.cross_models) {
    dir.ensure(dir.model(Architecture::Cross, name));
    m.save(dir.model(Architecture::Cross, name).string());
  }
  write_json(dir.pipeline(), ex.config.pipeline.to_json());
}

/// Loads the index, scorers and weights saved in a run directory into an
/// engine for `config.ir`. Weights are attached when present.
inline Engine load_engine(const RunDir& dir, const PipelineConfig& config) {
  const auto tmpl = dir.template_spec();
  const auto corpus = load_corpus(dir.corpus().string(), tmpl);
  auto index = std::make_shared<DocumentIndex>(DocumentIndex::load(dir.index().string(), &corpus));
  Engine e;
  e.index = index;
  std::shared_ptr<const IndexScorer> shared;
  if (config.ir == Architecture::Bm25) shared = std::make_shared<Bm25IndexScorer>();
  if (config.ir == Architecture::Late) shared = std::make_shared<LateIndexScorer>();
  auto provider = index->builtin_provider();
  for (const auto& spec : DatasetSpec::standard()) {
    if (config.ir == Architecture::Bi) {
      const auto file = dir.model(Architecture::Bi, spec.name);
      if (std::filesystem::exists(file)) {
        auto m = TrainedScorer::load(file.string());
        if (!provider) throw Error(Errc::ProviderMismatch, "index was built with an external provider");
        if (m.provider && *m.provider != provider->info())
          throw Error(Errc::ProviderMismatch, "model " + file.string() + " was trained on another provider version");
        e.ir[spec.name] = std::make_shared<BiIndexScorer>(provider, *m.bi, "bi/" + spec.name);
      }
    } else {
      e.ir[spec.name] = shared;
    }
    const auto cross = dir.model(Architecture::Cross, spec.name);
    if (std::filesystem::exists(cross))
      e.rr[spec.name] = std::make_shared<CrossPairScorer>(*TrainedScorer::load(cross.string()).cross, "cross/" + spec.name);
  }
  const std::string arch(architecture_name(config.ir));
  if (std::filesystem::exists(dir.weights(Stage::IR, arch)))
    e.ir_weights = CriterionWeights::load(dir.weights(Stage::IR, arch).string());
  if (std::filesystem::exists(dir.weights(Stage::RR, "cross")))
    e.rr_weights = CriterionWeights::load(dir.weights(Stage::RR, "cross").string());
  return e;
}

}  // namespace crest
