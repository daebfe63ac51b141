#pragma once

#include <chrono>
#include <cstdlib>
#include <future>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "crest/observation.hpp"
#include "crest/pipeline.hpp"
#include "crest/template_spec.hpp"
#include "crest/trouble_report.hpp"

namespace crest {

/// Immutable artifacts a service instance answers from.
struct ServiceState {
  Engine engine;
  std::map<std::string, TroubleReport> reports;  // by id, for headlines and GET /tr
  TemplateSpec tmpl = TemplateSpec::defaults();
  PipelineConfig pipeline;

  static std::shared_ptr<const ServiceState> make(Engine engine, const Corpus& corpus, PipelineConfig pipeline,
                                                  TemplateSpec tmpl = TemplateSpec::defaults()) {
    auto s = std::make_shared<ServiceState>();
    s->engine = std::move(engine);
    for (const auto& tr : corpus) s->reports.emplace(tr.id, tr);
    s->pipeline = std::move(pipeline);
    s->tmpl = std::move(tmpl);
    return s;
  }
};

struct ServiceOptions {
  std::size_t excerpt_chars = 240;
  std::size_t default_results = 10;
  std::chrono::milliseconds deadline{10000};
};

struct RetrieveRequest {
  std::string headline;
  std::string observation;
  CriterionSet criteria = CriterionSet::model_criteria();
  std::optional<std::size_t> k;
  std::size_t results = 10;
  std::optional<bool> rerank, ir_ensemble, rr_ensemble;

  /// Throws InvalidArgument on malformed input.
  static RetrieveRequest from_json(const nlohmann::json& j, std::size_t default_results) {
    if (!j.is_object()) throw Error(Errc::InvalidArgument, "request body must be a JSON object");
    RetrieveRequest r;
    r.results = default_results;
    try {
      r.headline = j.value("headline", std::string{});
      r.observation = j.value("observation", std::string{});
      if (j.contains("criteria")) {
        r.criteria = CriterionSet{};
        for (const auto& c : j.at("criteria")) {
          const auto crit = parse_criterion(c.get<std::string>());
          if (crit != Criterion::TroubleDescription) r.criteria.insert(crit);
        }
      }
      if (j.contains("k")) {
        const auto k = j.at("k").get<long long>();
        if (k <= 0) throw Error(Errc::InvalidArgument, "k must be positive");
        r.k = static_cast<std::size_t>(k);
      }
      if (j.contains("results")) {
        const auto n = j.at("results").get<long long>();
        if (n <= 0) throw Error(Errc::InvalidArgument, "results must be positive");
        r.results = static_cast<std::size_t>(n);
      }
      if (j.contains("stage")) {
        const auto& s = j.at("stage");
        if (s.contains("rerank")) r.rerank = s.at("rerank").get<bool>();
        if (s.contains("ir_ensemble")) r.ir_ensemble = s.at("ir_ensemble").get<bool>();
        if (s.contains("rr_ensemble")) r.rr_ensemble = s.at("rr_ensemble").get<bool>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidArgument, std::string("malformed request: ") + e.what());
    }
    if (trim(r.headline).empty() && trim(r.observation).empty())
      throw Error(Errc::InvalidArgument, "headline or observation required");
    return r;
  }
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

inline HttpReply error_reply(int status, Errc code, const std::string& message) {
  return {status, {{"error", errc_name(code)}, {"message", message}}};
}

inline std::string excerpt(const std::string& text, std::size_t chars) {
  if (text.size() <= chars) return text;
  std::size_t cut = chars;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;  // keep UTF-8 whole
  return text.substr(0, cut) + "...";
}

/// Answers one retrieve request synchronously.
inline HttpReply handle_retrieve(const ServiceState& state, const RetrieveRequest& req, const ServiceOptions& options) {
  TroubleReport tr;
  tr.id = "query";
  tr.headline = req.headline;
  tr.observation = parse_observation(req.observation, state.tmpl);

  PipelineConfig cfg = state.pipeline;
  cfg.active = req.criteria;
  if (req.k) cfg.k = *req.k;
  if (req.rerank) cfg.rerank = *req.rerank;
  if (req.ir_ensemble) cfg.ir_ensemble = *req.ir_ensemble;
  if (req.rr_ensemble) cfg.rr_ensemble = *req.rr_ensemble;

  CriterionSet requested = req.criteria;
  requested.insert(Criterion::TroubleDescription);
  const auto bundle = build_query_bundle(tr, requested);
  const auto result = run_two_stage(bundle, state.engine, cfg);
  const auto& stage = result.final_stage();

  nlohmann::json weights = nlohmann::json::object();
  if (stage.ensemble)
    for (Criterion c : stage.criteria.to_vector()) weights[std::string(name_of(c))] = (*stage.weights)[c];

  nlohmann::json results = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min(req.results, result.ranking.size()); ++i) {
    const auto& b = result.ranking[i];
    const auto it = state.reports.find(b.doc_id);
    nlohmann::json scores = nlohmann::json::object();
    for (Criterion c : b.normalized.present().to_vector())
      scores[std::string(name_of(c))] = {{"raw", *b.raw[c]}, {"normalized", *b.normalized[c]}};
    nlohmann::json item{{"rank", i + 1},
                        {"tr_id", b.doc_id},
                        {"headline", it != state.reports.end() ? it->second.headline : std::string{}},
                        {"answer_excerpt", it != state.reports.end() ? excerpt(it->second.answer, options.excerpt_chars)
                                                                     : std::string{}},
                        {"aggregated", b.aggregated},
                        {"scores", scores}};
    if (b.ir_aggregated) item["ir_aggregated"] = *b.ir_aggregated;
    results.push_back(std::move(item));
  }

  CriterionSet skipped = req.criteria.without(Criterion::TroubleDescription);
  for (Criterion c : stage.criteria.to_vector()) skipped.erase(c);
  nlohmann::json parser = nlohmann::json::array();
  for (const auto& d : tr.observation.diagnostics) parser.push_back(d.to_string());
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : result.stages) stages.push_back(s.to_json());

  return {200,
          {{"api_version", "v1"},
           {"results", results},
           {"weights", weights},
           {"ensemble", stage.ensemble},
           {"stages", stages},
           {"diagnostics",
            {{"active_criteria", stage.criteria.names()},
             {"missing_criteria", bundle.missing.without(Criterion::TroubleDescription).names()},
             {"skipped_models", skipped.names()},
             {"parser", parser},
             {"notes", result.diagnostics}}}}};
}

/// Stateless request handlers over shared immutable state. A null state
/// answers 503.
class Service {
 public:
  Service(std::shared_ptr<const ServiceState> state, ServiceOptions options = {})
      : state_(std::move(state)), options_(options) {}

  HttpReply retrieve(const std::string& body) const {
    if (!state_) return error_reply(503, Errc::EmptyIndex, "index not loaded");
    RetrieveRequest req;
    try {
      req = RetrieveRequest::from_json(nlohmann::json::parse(body), options_.default_results);
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, Errc::InvalidArgument, std::string("body is not JSON: ") + e.what());
    } catch (const Error& e) {
      return error_reply(400, e.code(), e.what());
    }

    // The worker owns copies of everything it touches, so a request that
    // misses its deadline can finish in the background safely.
    auto promise = std::make_shared<std::promise<HttpReply>>();
    auto future = promise->get_future();
    std::thread([state = state_, req, options = options_, promise] {
      try {
        promise->set_value(handle_retrieve(*state, req, options));
      } catch (const Error& e) {
        const int status = (e.code() == Errc::EmptyIndex) ? 503 : (e.code() == Errc::RemoteUnavailable ? 503 : 400);
        promise->set_value(error_reply(e.code() == Errc::ConfigInvalid ? 500 : status, e.code(), e.what()));
      } catch (const std::exception& e) {
        promise->set_value(error_reply(500, Errc::InvalidArgument, e.what()));
      }
    }).detach();
    if (future.wait_for(options_.deadline) != std::future_status::ready)
      return error_reply(504, Errc::Timeout, "retrieval exceeded the deadline");
    return future.get();
  }

  HttpReply get_tr(const std::string& id) const {
    if (!state_) return error_reply(503, Errc::EmptyIndex, "index not loaded");
    const auto it = state_->reports.find(id);
    if (it == state_->reports.end()) return error_reply(404, Errc::UnknownDocument, "no trouble report " + id);
    const auto& tr = it->second;
    nlohmann::json criteria = nlohmann::json::object();
    for (Criterion c : tr.observation.present().to_vector())
      criteria[std::string(name_of(c))] = *tr.observation.text(c);
    return {200,
            {{"api_version", "v1"},
             {"tr_id", tr.id},
             {"headline", tr.headline},
             {"observation", tr.observation.raw},
             {"criteria", criteria},
             {"answer", tr.answer},
             {"metadata", tr.metadata}}};
  }

  nlohmann::json health() const {
    return {{"status", state_ ? "ok" : "no-index"}, {"documents", state_ ? state_->engine.index->size() : 0}};
  }

  /// Registers the routes on `server`; unversioned aliases kept for /retrieve
  /// and /tr/{id}.
  void mount(httplib::Server& server) const {
    auto send = [](httplib::Response& res, const HttpReply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    for (const char* path : {"/v1/retrieve", "/retrieve"})
      server.Post(path, [this, send](const httplib::Request& req, httplib::Response& res) { send(res, retrieve(req.body)); });
    for (const char* path : {R"(/v1/tr/([^/]+))", R"(/tr/([^/]+))"})
      server.Get(path, [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, get_tr(req.matches[1].str()));
      });
    server.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, {200, health()}); });
  }

 private:
  std::shared_ptr<const ServiceState> state_;
  ServiceOptions options_;
};

/// Port and artifact directory from CREST_PORT / CREST_ARTIFACT_DIR.
inline int env_port(int fallback) {
  if (const char* p = std::getenv("CREST_PORT")) {
    try {
      return std::stoi(p);
    } catch (const std::exception&) {
      throw Error(Errc::ConfigInvalid, std::string("CREST_PORT is not a number: ") + p);
    }
  }
  return fallback;
}

inline std::string env_artifact_dir(const std::string& fallback) {
  const char* d = std::getenv("CREST_ARTIFACT_DIR");
  return d ? std::string(d) : fallback;
}

}  // namespace crest
