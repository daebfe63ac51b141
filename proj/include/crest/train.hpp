#pragma once

#include <algorithm>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crest/dataset.hpp"
#include "crest/embedding.hpp"
#include "crest/error.hpp"
#include "crest/random.hpp"
#include "crest/scorers.hpp"

namespace crest {

struct TrainConfig {
  double margin = 1.0;
  std::size_t batch_size = 64;
  double learning_rate = 1e-5;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(margin > 0.0)) throw Error(Errc::InvalidArgument, "margin must be > 0");
    if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");
    if (!(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning_rate must be > 0");
  }

  nlohmann::json to_json() const {
    return {{"margin", margin}, {"batch_size", batch_size}, {"learning_rate", learning_rate}, {"epochs", epochs},
            {"seed", seed}};
  }
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.margin = j.value("margin", c.margin);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  double pairwise_accuracy = 0.0;  // share of triples with s+ > s-
  std::size_t triples = 0;

  nlohmann::json to_json() const {
    return {{"initial_loss", initial_loss}, {"epoch_loss", epoch_loss}, {"pairwise_accuracy", pairwise_accuracy},
            {"triples", triples}};
  }
};

/// Triplet hinge loss max(0, margin - s+ + s-).
inline double hinge_loss(double margin, double positive, double negative) {
  return std::max(0.0, margin - positive + negative);
}

// For a linear scorer s = w . phi, a triple only enters through
// delta = phi(q, d+) - phi(q, d-), with s+ - s- = w . delta.

inline double mean_hinge(std::span<const double> w, const std::vector<std::vector<double>>& deltas, double margin) {
  if (deltas.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : deltas) total += std::max(0.0, margin - dot(w, d));
  return total / static_cast<double>(deltas.size());
}

inline std::vector<double> hinge_gradient(std::span<const double> w, const std::vector<std::vector<double>>& deltas,
                                          double margin) {
  std::vector<double> g(w.size(), 0.0);
  if (deltas.empty()) return g;
  for (const auto& d : deltas) {
    if (margin - dot(w, d) <= 0.0) continue;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] -= d[k];
  }
  for (double& x : g) x /= static_cast<double>(deltas.size());
  return g;
}

inline double pairwise_accuracy(std::span<const double> w, const std::vector<std::vector<double>>& deltas) {
  if (deltas.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& d : deltas) ok += dot(w, d) > 0.0;
  return static_cast<double>(ok) / static_cast<double>(deltas.size());
}

/// Minibatch SGD on the mean hinge loss. Batches follow a seeded shuffle per
/// epoch; single-threaded, so results are bit-reproducible.
inline TrainReport train_linear(std::vector<double>& w, const std::vector<std::vector<double>>& deltas,
                                const TrainConfig& config) {
  config.validate();
  for (const auto& d : deltas)
    if (d.size() != w.size()) throw Error(Errc::DimensionMismatch, "feature size does not match weight count");

  TrainReport report;
  report.triples = deltas.size();
  report.initial_loss = mean_hinge(w, deltas, config.margin);

  Rng rng{mix64(config.seed)};
  std::vector<std::size_t> order(deltas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(w.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      bool active = false;
      for (std::size_t i = start; i < end; ++i) {
        const auto& d = deltas[order[i]];
        if (config.margin - dot(w, d) <= 0.0) continue;
        active = true;
        for (std::size_t k = 0; k < w.size(); ++k) grad[k] -= d[k];
      }
      if (!active) continue;
      const double scale = config.learning_rate / static_cast<double>(end - start);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= scale * grad[k];
    }
    report.epoch_loss.push_back(mean_hinge(w, deltas, config.margin));
  }
  report.pairwise_accuracy = pairwise_accuracy(w, deltas);
  return report;
}

/// What the trainable scorers need from the collection.
struct TrainingContext {
  std::shared_ptr<const EmbeddingProvider> provider;  // bi
  std::shared_ptr<const CollectionStats> stats;       // cross
  std::size_t cross_budget = 512;
  std::size_t cross_buckets = 64;
};

struct TrainedScorer {
  Architecture architecture = Architecture::Bi;
  std::string dataset;
  std::optional<BiModel> bi;
  std::optional<CrossModel> cross;
  std::optional<ProviderInfo> provider;
  TrainConfig config;
  TrainReport report;

  nlohmann::json to_json() const {
    nlohmann::json j{{"architecture", architecture_name(architecture)},
                     {"dataset", dataset},
                     {"config", config.to_json()},
                     {"report", report.to_json()}};
    if (bi) j["bi"] = bi->to_json();
    if (cross) j["cross"] = cross->to_json();
    if (provider) j["provider"] = provider->to_json();
    return j;
  }

  static TrainedScorer from_json(const nlohmann::json& j) {
    TrainedScorer t;
    t.architecture = parse_architecture(j.at("architecture").get<std::string>());
    t.dataset = j.at("dataset").get<std::string>();
    t.config = TrainConfig::from_json(j.value("config", nlohmann::json::object()));
    if (j.contains("bi")) t.bi = BiModel::from_json(j.at("bi"));
    if (j.contains("cross")) t.cross = CrossModel::from_json(j.at("cross"));
    if (j.contains("provider")) t.provider = ProviderInfo::from_json(j.at("provider"));
    if (j.contains("report")) {
      const auto& r = j.at("report");
      t.report.initial_loss = r.value("initial_loss", 0.0);
      t.report.epoch_loss = r.value("epoch_loss", std::vector<double>{});
      t.report.pairwise_accuracy = r.value("pairwise_accuracy", 0.0);
      t.report.triples = r.value("triples", std::size_t{0});
    }
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    out << to_json().dump(1) << '\n';
  }

  static TrainedScorer load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + ": " + e.what());
    }
  }
};

namespace detail {

class EmbeddingCache {
 public:
  explicit EmbeddingCache(const EmbeddingProvider& provider) : provider_(provider) {}
  const Embedding& get(const std::string& text) {
    auto it = cache_.find(text);
    if (it == cache_.end()) it = cache_.emplace(text, provider_.embed(text)).first;
    return it->second;
  }

 private:
  const EmbeddingProvider& provider_;
  std::unordered_map<std::string, Embedding> cache_;
};

}  // namespace detail

/// Trains a bi or cross scorer on the triples of a 1:1 dataset.
inline TrainedScorer train_scorer(const Dataset& dataset, const TrainConfig& config, Architecture architecture,
                                  const TrainingContext& ctx) {
  if (architecture == Architecture::Bm25 || architecture == Architecture::Late)
    throw Error(Errc::NonTrainableScorer,
                std::string(architecture_name(architecture)) + " scorer has no trainable parameters");
  const auto triples = to_triples(dataset);
  if (triples.empty()) throw Error(Errc::EmptyDataset, "dataset '" + dataset.name + "' yields no triples");

  TrainedScorer out;
  out.architecture = architecture;
  out.dataset = dataset.name;
  out.config = config;
  std::vector<std::vector<double>> deltas;
  deltas.reserve(triples.size());

  if (architecture == Architecture::Bi) {
    if (!ctx.provider) throw Error(Errc::ConfigInvalid, "bi training needs an embedding provider");
    detail::EmbeddingCache cache(*ctx.provider);
    for (const auto& t : triples) {
      const auto& q = cache.get(t.query);
      auto pos = bi_features(q, cache.get(t.positive));
      const auto neg = bi_features(q, cache.get(t.negative));
      for (std::size_t k = 0; k < pos.size(); ++k) pos[k] -= neg[k];
      deltas.push_back(std::move(pos));
    }
    BiModel model = BiModel::identity(ctx.provider->info().dim);
    out.report = train_linear(model.diag, deltas, config);
    out.bi = std::move(model);
    out.provider = ctx.provider->info();
  } else {
    if (!ctx.stats) throw Error(Errc::ConfigInvalid, "cross training needs collection statistics");
    CrossModel model = CrossModel::initial(ctx.cross_budget, ctx.cross_buckets);
    std::unordered_map<std::string, Tokens> tokens;
    auto tok = [&](const std::string& text) -> const Tokens& {
      auto it = tokens.find(text);
      if (it == tokens.end()) it = tokens.emplace(text, preprocess(text)).first;
      return it->second;
    };
    for (const auto& t : triples) {
      auto pos = cross_features(tok(t.query), tok(t.positive), *ctx.stats, model);
      const auto neg = cross_features(tok(t.query), tok(t.negative), *ctx.stats, model);
      for (std::size_t k = 0; k < pos.size(); ++k) pos[k] -= neg[k];
      deltas.push_back(std::move(pos));
    }
    out.report = train_linear(model.weights, deltas, config);
    out.cross = std::move(model);
  }
  return out;
}

}  // namespace crest
