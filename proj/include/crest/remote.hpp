#pragma once

#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "crest/embedding.hpp"
#include "crest/error.hpp"
#include "crest/pipeline.hpp"
#include "crest/scorers.hpp"

namespace crest {

// Remote scorer protocol (JSON over HTTP):
//   POST /embed        {"provider": name, "texts": [...]}
//                   -> {"vectors": [[...], ...], "version": "...", "dim": n}
//   POST /score_pairs  {"model": name, "pairs": ["[CLS] q [SEP] d [SEP]", ...]}
//                   -> {"scores": [...]}
struct RemoteOptions {
  std::string host = "127.0.0.1";
  int port = 8090;
  std::chrono::milliseconds timeout{2000};
  unsigned retries = 2;  // extra attempts after the first
  std::chrono::milliseconds backoff{50};
};

namespace detail {

/// POSTs `body` and returns the parsed JSON reply. Transport failures and 5xx
/// replies are retried, then reported as RemoteUnavailable; 4xx replies are
/// not retried.
inline nlohmann::json post_json(const RemoteOptions& opt, const std::string& path, const nlohmann::json& body) {
  std::string last_error;
  for (unsigned attempt = 0; attempt <= opt.retries; ++attempt) {
    if (attempt) std::this_thread::sleep_for(opt.backoff * attempt);
    httplib::Client cli(opt.host, opt.port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(Errc::InvalidArgument, path + " rejected request: HTTP " + std::to_string(res->status) + " " + res->body);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path + " returned malformed JSON: " + e.what());
    }
  }
  throw Error(Errc::RemoteUnavailable, opt.host + ":" + std::to_string(opt.port) + path + " unavailable (" +
                                           std::to_string(opt.retries + 1) + " attempts): " + last_error);
}

}  // namespace detail

/// Embeddings from an external service. The provider version and dimension
/// are fetched once (empty /embed call) and every later reply must echo the
/// same version.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string name, RemoteOptions options)
      : name_(std::move(name)), options_(std::move(options)) {}

  ProviderInfo info() const override {
    std::call_once(probed_, [&] {
      const auto reply = detail::post_json(options_, "/embed", {{"provider", name_}, {"texts", nlohmann::json::array()}});
      info_ = {name_, reply.at("version").get<std::string>(), reply.at("dim").get<std::size_t>()};
    });
    return info_;
  }

  Embedding embed(std::string_view text) const override {
    const std::string t(text);
    return embed_batch(std::span<const std::string>(&t, 1)).front();
  }

  std::vector<Embedding> embed_batch(std::span<const std::string> texts) const override {
    const ProviderInfo expected = info();
    const auto reply = detail::post_json(
        options_, "/embed", {{"provider", name_}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}});
    const auto version = reply.at("version").get<std::string>();
    if (version != expected.version)
      throw Error(Errc::ProviderMismatch, "remote provider version changed from " + expected.version + " to " + version);
    const auto& vectors = reply.at("vectors");
    if (vectors.size() != texts.size()) throw Error(Errc::ParseError, "remote /embed returned wrong vector count");
    std::vector<Embedding> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      Embedding e{vectors[i].get<std::vector<double>>(), name_, version, trim(texts[i]).empty()};
      if (e.dim() != expected.dim) throw Error(Errc::DimensionMismatch, "remote vector has wrong dimension");
      for (double v : e.values)
        if (!std::isfinite(v)) throw Error(Errc::ParseError, "remote vector has non-finite entries");
      out.push_back(std::move(e));
    }
    return out;
  }

 private:
  std::string name_;
  RemoteOptions options_;
  mutable std::once_flag probed_;
  mutable ProviderInfo info_;
};

/// Cross scoring by an external model. Pairs are sent already framed and
/// truncated to the token budget.
class RemoteCrossScorer final : public PairScorer {
 public:
  RemoteCrossScorer(std::string model, RemoteOptions options, std::size_t budget = 512)
      : model_(std::move(model)), options_(std::move(options)), budget_(budget) {}

  std::string id() const override { return "remote/" + model_; }

  std::vector<double> score_pairs(const DocumentIndex& index, std::string_view query,
                                  std::span<const std::size_t> positions, std::size_t budget) const override {
    std::vector<std::string> pairs;
    pairs.reserve(positions.size());
    for (std::size_t pos : positions) pairs.push_back(frame_cross_input(query, index.text(pos), budget ? budget : budget_));
    const auto reply = detail::post_json(options_, "/score_pairs", {{"model", model_}, {"pairs", pairs}});
    auto scores = reply.at("scores").get<std::vector<double>>();
    if (scores.size() != pairs.size()) throw Error(Errc::ParseError, "remote /score_pairs returned wrong score count");
    return scores;
  }

 private:
  std::string model_;
  RemoteOptions options_;
  std::size_t budget_;
};

}  // namespace crest
