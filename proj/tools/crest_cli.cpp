#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "crest/crest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crest;

namespace {

// Config file layout:
//   { "corpus": {"seed": 7, "synth": {...}},
//     "experiment": {...},
//     "service": {"port": 8080, "excerpt_chars": 240, "results": 10, "deadline_ms": 10000} }
struct Settings {
  json raw = json::object();
  std::uint64_t corpus_seed = 7;
  SynthParams synth;
  ExperimentConfig experiment;
  ServiceOptions service;
  int port = 8080;
};

// "a.b.c=value" sets raw["a"]["b"]["c"]; the value is parsed as JSON when it
// parses, else taken as a string.
void apply_override(json& raw, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(Errc::ConfigInvalid, "override must be key=value: " + assignment);
  json value;
  try {
    value = json::parse(assignment.substr(eq + 1));
  } catch (const json::exception&) {
    value = assignment.substr(eq + 1);
  }
  std::string pointer = "/" + assignment.substr(0, eq);
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  raw[json::json_pointer(pointer)] = value;
}

Settings load_settings(const std::string& path, const std::vector<std::string>& overrides) {
  Settings s;
  if (!path.empty()) s.raw = read_json(path);
  for (const auto& o : overrides) apply_override(s.raw, o);
  try {
    const json corpus = s.raw.value("corpus", json::object());
    s.corpus_seed = corpus.value("seed", s.corpus_seed);
    s.synth = SynthParams::from_json(corpus.value("synth", json::object()));
    s.experiment = ExperimentConfig::from_json(s.raw.value("experiment", json::object()));
    s.experiment.pipeline.validate();
    const json service = s.raw.value("service", json::object());
    s.port = service.value("port", s.port);
    s.service.excerpt_chars = service.value("excerpt_chars", s.service.excerpt_chars);
    s.service.default_results = service.value("results", s.service.default_results);
    s.service.deadline = std::chrono::milliseconds(service.value("deadline_ms", 10000));
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("config: ") + e.what());
  }
  return s;
}

Corpus load_dir_corpus(const RunDir& dir) { return load_corpus(dir.corpus().string(), dir.template_spec()); }

// The parts of an experiment that weight training and run generation read.
Experiment experiment_shell(const RunDir& dir, const Settings& s) {
  Experiment ex;
  ex.corpus = load_dir_corpus(dir);
  ex.qrels = Qrels::load(dir.qrels().string());
  ex.config = s.experiment;
  ex.split = load_splits(dir.splits());
  std::set<std::string> ids;
  for (const auto& tr : ex.corpus) ids.insert(tr.id);
  for (const auto* part : {&ex.split.train, &ex.split.validation, &ex.split.test})
    for (const auto& id : *part)
      if (!ids.count(id)) throw Error(Errc::CorpusMismatch, "splits.json names " + id + ", which is not in the corpus");
  return ex;
}

std::string arch_label(Architecture a) { return std::string(architecture_name(a)); }

void save_run(const RunDir& dir, const std::string& name, const Run& run, json& outputs) {
  dir.ensure(dir.run(name));
  run.save(dir.run(name).string());
  outputs.push_back(fs::relative(dir.run(name), dir.root()).string());
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// --- subcommands --------------------------------------------------------------------

void cmd_synth(const RunDir& dir, Settings s, std::optional<std::size_t> n, std::optional<std::uint64_t> seed) {
  if (n) s.synth.n_trs = *n;
  if (seed) s.corpus_seed = *seed;
  s.synth.validate();
  const auto out = synth_corpus(s.synth, s.corpus_seed, dir.template_spec());
  fs::create_directories(dir.root());
  save_corpus(out.corpus, dir.corpus().string());
  out.qrels.save(dir.qrels().string());
  dir.record("synth-corpus", {{"seed", s.corpus_seed}, {"params", s.synth.to_json()}, {"outputs", {"corpus.jsonl", "qrels.txt"}}});
  std::cout << "wrote " << out.corpus.size() << " trouble reports to " << dir.corpus().string() << '\n';
}

void cmd_parse(const std::optional<RunDir>& dir, const std::string& input) {
  std::string raw;
  if (input == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    raw = buf.str();
  } else {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + input);
    std::ostringstream buf;
    buf << in.rdbuf();
    raw = buf.str();
  }
  const auto tmpl = dir ? dir->template_spec() : TemplateSpec::defaults();
  const auto obs = parse_observation(raw, tmpl);
  json criteria = json::object();
  for (Criterion c : obs.present().to_vector()) criteria[std::string(name_of(c))] = *obs.text(c);
  json diagnostics = json::array();
  for (const auto& d : obs.diagnostics) diagnostics.push_back(d.to_string());
  const json result{{"criteria", criteria}, {"residue", obs.residue}, {"diagnostics", diagnostics}};
  if (dir) {
    write_json(dir->path("reports/parse.json"), result);
    dir->record("parse", {{"input", input}, {"outputs", {"reports/parse.json"}}});
  }
  print_json(result);
}

void cmd_build_index(const RunDir& dir, const Settings& s) {
  const auto corpus = load_dir_corpus(dir);
  const auto& cfg = s.experiment;
  const auto split = make_splits(corpus, cfg.validation_size, cfg.test_size, cfg.seed);
  save_splits(split, dir.splits());
  json outputs{"splits.json", "index.json", "pipeline.json"};
  for (const auto& spec : DatasetSpec::standard()) {
    const auto ds = build_dataset(corpus, spec, split, cfg.seed, cfg.threads);
    dir.ensure(dir.dataset(spec.name));
    save_dataset(ds, dir.dataset(spec.name).string());
    outputs.push_back("datasets/" + spec.name + ".jsonl");
  }
  const auto index = build_index(corpus, cfg.index);
  index.save(dir.index().string());
  write_json(dir.pipeline(), cfg.pipeline.to_json());
  dir.record("build-index", {{"seed", cfg.seed}, {"documents", index.size()}, {"outputs", outputs}});
  std::cout << "indexed " << index.size() << " documents; " << split.validation.size() << " validation and "
            << split.test.size() << " test queries\n";
}

void cmd_train_scorer(const RunDir& dir, const Settings& s, const std::string& arch_name, const std::string& only) {
  const auto corpus = load_dir_corpus(dir);
  const auto index = DocumentIndex::load(dir.index().string(), &corpus);
  const auto& cfg = s.experiment;
  TrainingContext ctx{index.builtin_provider(), index.shared_stats(), cfg.pipeline.token_budget, 64};
  std::vector<Architecture> archs;
  if (arch_name == "all")
    archs = {Architecture::Bi, Architecture::Cross};
  else
    archs = {parse_architecture(arch_name)};
  json outputs = json::array(), summary = json::array();
  for (const auto& spec : DatasetSpec::standard()) {
    if (!only.empty() && only != spec.name) continue;
    const auto ds = load_dataset(dir.dataset(spec.name).string(), spec.name);
    for (Architecture a : archs) {
      const auto& tc = a == Architecture::Cross ? cfg.cross_train : cfg.bi_train;
      const auto model = train_scorer(ds, tc, a, ctx);
      const auto file = dir.model(a, spec.name);
      dir.ensure(file);
      model.save(file.string());
      outputs.push_back(fs::relative(file, dir.root()).string());
      summary.push_back({{"model", arch_label(a) + "-" + spec.name},
                         {"initial_loss", model.report.initial_loss},
                         {"final_loss", model.report.epoch_loss.empty() ? model.report.initial_loss
                                                                        : model.report.epoch_loss.back()},
                         {"pairwise_accuracy", model.report.pairwise_accuracy}});
    }
  }
  if (outputs.empty()) throw Error(Errc::InvalidArgument, "no dataset named " + only);
  dir.record("train-scorer", {{"seed", cfg.bi_train.seed}, {"architecture", arch_name}, {"outputs", outputs}});
  print_json(summary);
}

void cmd_train_weights(const RunDir& dir, const Settings& s) {
  const auto ex = experiment_shell(dir, s);
  Engine engine = load_engine(dir, ex.config.pipeline);
  const Architecture ir = ex.config.pipeline.ir;
  const auto outcome = train_stage_weights(ex, engine, ir, ex.config.pipeline.active);
  const auto ir_file = dir.weights(Stage::IR, arch_label(ir));
  const auto rr_file = dir.weights(Stage::RR, "cross");
  dir.ensure(ir_file);
  outcome.ir.save(ir_file.string());
  outcome.rr.save(rr_file.string());
  const json report{{"ir", outcome.ir.to_json()},
                    {"rr", outcome.rr.to_json()},
                    {"ir_epoch_mrr", outcome.ir_training.epoch_mrr},
                    {"rr_epoch_mrr", outcome.rr_training.epoch_mrr}};
  write_json(dir.report("weights"), report);
  dir.record("train-weights", {{"seed", ex.config.weight_train.seed},
                               {"outputs",
                                {fs::relative(ir_file, dir.root()).string(), fs::relative(rr_file, dir.root()).string(),
                                 "reports/weights.json"}}});
  print_json(report);
}

std::vector<TroubleReport> split_queries(const Experiment& ex, const std::string& split) {
  if (split == "test") return ex.test_trs();
  if (split == "validation") return ex.validation_trs();
  throw Error(Errc::InvalidArgument, "split must be 'test' or 'validation'");
}

void cmd_run(const RunDir& dir, const Settings& s, const std::string& split, bool isolated) {
  const auto ex = experiment_shell(dir, s);
  const Engine engine = load_engine(dir, ex.config.pipeline);
  const auto queries = split_queries(ex, split);
  json outputs = json::array();
  for (const auto& [name, run] : standard_runs(ex, engine, queries, isolated)) save_run(dir, name, run, outputs);
  const auto detailed =
      run_query_set(engine, queries, ex.config.pipeline, "CREST", isolated, ex.config.threads, true);
  dir.ensure(dir.breakdown("CREST"));
  save_breakdowns(detailed.breakdowns, dir.breakdown("CREST").string());
  outputs.push_back(fs::relative(dir.breakdown("CREST"), dir.root()).string());
  dir.record("run", {{"split", split}, {"isolated", isolated}, {"outputs", outputs}});
  std::cout << "wrote " << outputs.size() << " files for " << queries.size() << " " << split << " queries\n";
}

std::vector<std::pair<std::string, Run>> load_runs(const RunDir& dir, const std::vector<std::string>& files) {
  std::vector<std::pair<std::string, Run>> runs;
  if (!files.empty()) {
    for (const auto& f : files) {
      auto run = Run::load(f);
      runs.emplace_back(run.tag(), std::move(run));
    }
    return runs;
  }
  if (!fs::exists(dir.path("runs"))) throw Error(Errc::IoError, "no runs in " + dir.root().string());
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir.path("runs")))
    if (e.path().extension() == ".trec") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    auto run = Run::load(p.string());
    runs.emplace_back(run.tag(), std::move(run));
  }
  return runs;
}

void cmd_evaluate(const RunDir& dir, const std::vector<std::string>& files, const std::string& qrels_file,
                  const std::string& split) {
  const auto qrels = Qrels::load(qrels_file.empty() ? dir.qrels().string() : qrels_file);
  const auto runs = load_runs(dir, files);
  json reports = json::array();
  for (const auto& [name, run] : runs) reports.push_back(evaluate(run, qrels, name, split).to_json());
  const auto tables = tabulate(runs, qrels, split);
  write_json(dir.report("evaluation"), {{"reports", reports}, {"tables", tables.to_json()}});
  dir.record("evaluate", {{"runs", runs.size()}, {"outputs", {"reports/evaluation.json"}}});
  std::cout << tables.render();
}

void cmd_calibrate(const RunDir& dir, const std::vector<std::string>& files, std::size_t bins, std::size_t top) {
  const auto qrels = Qrels::load(dir.qrels().string());
  std::vector<std::pair<std::string, Run>> runs;
  if (files.empty()) {
    for (const char* name : {"CREST", "SingleModel"})
      if (fs::exists(dir.run(name))) runs.emplace_back(name, Run::load(dir.run(name).string()));
    if (runs.empty()) throw Error(Errc::IoError, "no CREST or SingleModel run in " + dir.root().string());
  } else {
    runs = load_runs(dir, files);
  }
  json report = json::object(), outputs{"reports/calibration.json"};
  for (const auto& [name, run] : runs) {
    const auto cls = to_classification(run, qrels, top);
    const auto diagram = reliability_diagram(cls.samples, bins);
    json curve = json::array();
    for (const auto& b : diagram) curve.push_back(b.to_json());
    report[name] = {{"ece", ece(cls.samples, bins)}, {"samples", cls.samples.size()},
                    {"skipped", cls.skipped}, {"bins", curve}};
    const auto csv = dir.path("reports/" + RunDir::file_stem(name) + ".reliability.csv");
    dir.ensure(csv);
    std::ofstream out(csv, std::ios::binary);
    out << "bin,lower,upper,count,confidence,accuracy\n";
    for (const auto& b : diagram)
      out << b.index << ',' << b.lower << ',' << b.upper << ',' << b.count << ',' << b.mean_confidence << ','
          << b.accuracy << '\n';
    outputs.push_back(fs::relative(csv, dir.root()).string());
    std::printf("%s: ECE %.4f over %zu queries\n%s\n", name.c_str(), ece(cls.samples, bins), cls.samples.size(),
                render_reliability(diagram).c_str());
  }
  write_json(dir.report("calibration"), report);
  dir.record("calibrate", {{"bins", bins}, {"top", top}, {"outputs", outputs}});
}

void cmd_ablate(const RunDir& dir, const Settings& s, const std::string& split) {
  const auto ex = experiment_shell(dir, s);
  const Engine engine = load_engine(dir, ex.config.pipeline);
  if (!engine.ir_weights || !engine.rr_weights) throw Error(Errc::ConfigInvalid, "run train-weights first");
  const auto runs = ablation_runs(ex, engine, split_queries(ex, split));
  json outputs = json::array();
  for (const auto& [name, run] : runs) save_run(dir, name, run, outputs);
  const auto tables = tabulate(runs, ex.qrels, split);
  write_json(dir.report("ablation"), tables.to_json());
  outputs.push_back("reports/ablation.json");
  dir.record("ablate", {{"split", split}, {"outputs", outputs}});
  std::cout << tables.render();
}

httplib::Server* g_server = nullptr;

void cmd_serve(const std::string& run_dir, const Settings& s, std::optional<int> port_flag) {
  const RunDir dir(env_artifact_dir(run_dir));
  PipelineConfig pipeline = s.experiment.pipeline;
  if (fs::exists(dir.pipeline())) pipeline = PipelineConfig::from_json(read_json(dir.pipeline()));
  Engine engine = load_engine(dir, pipeline);
  if ((pipeline.ir_ensemble && !engine.ir_weights) || (pipeline.rerank && pipeline.rr_ensemble && !engine.rr_weights))
    throw Error(Errc::ConfigInvalid, "ensemble enabled but no trained weights in " + dir.root().string());
  const auto corpus = load_dir_corpus(dir);
  const Service service(ServiceState::make(std::move(engine), corpus, pipeline, dir.template_spec()), s.service);
  const int port = port_flag ? *port_flag : env_port(s.port);

  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cerr << "serving " << corpus.size() << " trouble reports from " << dir.root().string() << " on port " << port
            << '\n';
  if (!server.listen("0.0.0.0", port)) throw Error(Errc::IoError, "cannot listen on port " + std::to_string(port));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crest: criterion-aware trouble report retrieval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path, run_dir = "run";
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub, bool needs_dir = true) {
    sub->add_option("--config,-c", config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* opt = sub->add_option("--run-dir,-d", run_dir, "run directory holding artifacts and the manifest");
    if (!needs_dir) opt->default_str("");
    sub->add_option("--set", overrides, "config override key.path=value (repeatable)");
  };

  auto* synth = app.add_subcommand("synth-corpus", "generate a synthetic corpus with planted criterion signals");
  common(synth);
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  synth->add_option("--n", n, "number of trouble reports");
  synth->add_option("--seed", seed, "generator seed");

  auto* parse = app.add_subcommand("parse", "split a raw observation into criterion fields");
  std::string parse_input = "-";
  bool parse_record = false;
  common(parse, false);
  parse->add_option("--input,-i", parse_input, "observation text file, '-' for stdin");
  parse->add_flag("--record", parse_record, "also write reports/parse.json into the run directory");

  auto* index = app.add_subcommand("build-index", "make splits and datasets and index the corpus answers");
  common(index);

  auto* train = app.add_subcommand("train-scorer", "train bi and cross scorers on every dataset");
  common(train);
  std::string arch = "all", dataset;
  train->add_option("--arch", arch, "bi, cross or all")->check(CLI::IsMember({"bi", "cross", "all"}));
  train->add_option("--dataset", dataset, "train only this dataset (e.g. HTI)");

  auto* weights = app.add_subcommand("train-weights", "learn IR and RR criterion weights on the validation split");
  common(weights);

  std::string split = "test";
  auto* run = app.add_subcommand("run", "produce ranked runs for every configuration");
  common(run);
  bool isolated = false;
  run->add_option("--split", split, "test or validation");
  run->add_flag("--isolated", isolated, "re-rank the whole corpus instead of the IR top-K");

  auto* eval = app.add_subcommand("evaluate", "score runs against qrels");
  common(eval);
  std::vector<std::string> run_files;
  std::string qrels_file;
  eval->add_option("--run", run_files, "TREC run file (repeatable; default: every run in the run directory)");
  eval->add_option("--qrels", qrels_file, "qrels file (default: the run directory's)");
  eval->add_option("--split", split, "split label recorded in the reports");

  auto* cal = app.add_subcommand("calibrate", "expected calibration error and reliability diagrams");
  common(cal);
  std::size_t bins = 10, top = 5;
  cal->add_option("--run", run_files, "TREC run file (repeatable; default: CREST and SingleModel)");
  cal->add_option("--bins", bins, "number of confidence bins")->check(CLI::PositiveNumber);
  cal->add_option("--top", top, "documents in the softmax")->check(CLI::PositiveNumber);

  auto* abl = app.add_subcommand("ablate", "CREST with each criterion removed");
  common(abl);
  abl->add_option("--split", split, "test or validation");

  auto* serve = app.add_subcommand("serve", "HTTP retrieval service over the run directory's artifacts");
  common(serve);
  std::optional<int> port;
  serve->add_option("--port", port, "listen port (default: CREST_PORT, then config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const Settings settings = load_settings(config_path, overrides);
    const RunDir dir(run_dir);
    if (*synth) cmd_synth(dir, settings, n, seed);
    if (*parse) cmd_parse(parse_record ? std::optional<RunDir>(dir) : std::nullopt, parse_input);
    if (*index) cmd_build_index(dir, settings);
    if (*train) cmd_train_scorer(dir, settings, arch, dataset);
    if (*weights) cmd_train_weights(dir, settings);
    if (*run) cmd_run(dir, settings, split, isolated);
    if (*eval) cmd_evaluate(dir, run_files, qrels_file, split);
    if (*cal) cmd_calibrate(dir, run_files, bins, top);
    if (*abl) cmd_ablate(dir, settings, split);
    if (*serve) cmd_serve(run_dir, settings, port);
  } catch (const Error& e) {
    std::cerr << json{{"error", errc_name(e.code())}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return 3;
  }
  return 0;
}
