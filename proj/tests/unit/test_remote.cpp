#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "crest/remote.hpp"
#include "crest/synth.hpp"

using namespace crest;
using nlohmann::json;

namespace {

// Local stand-in for an embedding / cross-scoring service.
class FakeService {
 public:
  FakeService() {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      const auto body = json::parse(req.body);
      if (body.at("provider") != "toy") {
        res.status = 404;
        return;
      }
      json vectors = json::array();
      for (const auto& t : body.at("texts")) {
        const auto s = t.get<std::string>();
        vectors.push_back({static_cast<double>(s.size()), 1.0, 0.0});
      }
      res.set_content(json{{"vectors", vectors}, {"version", version}, {"dim", 3}}.dump(), "application/json");
    });
    server_.Post("/score_pairs", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const auto body = json::parse(req.body);
      json scores = json::array();
      for (const auto& p : body.at("pairs")) {
        last_pairs.push_back(p.get<std::string>());
        scores.push_back(static_cast<double>(p.get<std::string>().size()));
      }
      res.set_content(json{{"scores", scores}}.dump(), "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  RemoteOptions options() const {
    RemoteOptions o;
    o.port = port;
    o.timeout = std::chrono::milliseconds(1000);
    o.backoff = std::chrono::milliseconds(1);
    return o;
  }

  int port = 0;
  std::atomic<int> calls{0};
  std::atomic<int> fail_next{0};
  std::string version = "v1";
  std::vector<std::string> last_pairs;

 private:
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace

TEST(RemoteEmbedding, ProbesInfoAndEmbeds) {
  FakeService svc;
  RemoteEmbeddingProvider p("toy", svc.options());
  EXPECT_EQ(p.info().dim, 3u);
  EXPECT_EQ(p.info().version, "v1");
  const auto e = p.embed("abcd");
  EXPECT_EQ(e.values, (std::vector<double>{4.0, 1.0, 0.0}));
  EXPECT_EQ(e.provider, "toy");
}

TEST(RemoteEmbedding, RetriesServerErrors) {
  FakeService svc;
  svc.fail_next = 2;
  RemoteEmbeddingProvider p("toy", svc.options());
  EXPECT_EQ(p.info().dim, 3u);
  EXPECT_EQ(svc.calls.load(), 3);
}

TEST(RemoteEmbedding, GivesUpAfterRetries) {
  FakeService svc;
  svc.fail_next = 10;
  RemoteEmbeddingProvider p("toy", svc.options());
  try {
    p.info();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RemoteUnavailable);
  }
  EXPECT_EQ(svc.calls.load(), 3);
}

TEST(RemoteEmbedding, DeadPortIsUnavailable) {
  int port;
  {
    FakeService svc;
    port = svc.port;
  }
  RemoteOptions o;
  o.port = port;
  o.retries = 1;
  o.timeout = std::chrono::milliseconds(300);
  o.backoff = std::chrono::milliseconds(1);
  RemoteEmbeddingProvider p("toy", o);
  try {
    p.embed("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RemoteUnavailable);
  }
}

TEST(RemoteEmbedding, ClientErrorsAreNotRetried) {
  FakeService svc;
  RemoteEmbeddingProvider p("unknown", svc.options());
  EXPECT_THROW(p.info(), Error);
  EXPECT_EQ(svc.calls.load(), 1);
}

TEST(RemoteEmbedding, VersionChangeIsDetected) {
  FakeService svc;
  RemoteEmbeddingProvider p("toy", svc.options());
  p.embed("a");
  svc.version = "v2";
  try {
    p.embed("a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProviderMismatch);
  }
}

TEST(RemoteCross, SendsFramedTruncatedPairs) {
  FakeService svc;
  SynthParams sp;
  sp.n_trs = 5;
  const auto corpus = synth_corpus(sp, 1).corpus;
  const auto idx = build_index(corpus);
  RemoteCrossScorer scorer("mono", svc.options(), 13);
  const std::vector<std::size_t> positions{0, 2};
  const auto scores = scorer.score_pairs(idx, "one two three four five six seven", positions, 0);
  ASSERT_EQ(scores.size(), 2u);
  ASSERT_EQ(svc.last_pairs.size(), 2u);
  EXPECT_EQ(svc.last_pairs[0], frame_cross_input("one two three four five six seven", idx.text(0), 13));
  EXPECT_EQ(svc.last_pairs[0].rfind("[CLS] one two three four five [SEP] ", 0), 0u);
  EXPECT_EQ(scores[1], static_cast<double>(svc.last_pairs[1].size()));
}
