#include <doctest.h>

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "divkit/scorer.hpp"

using namespace divkit;

TEST_CASE("mock scorer is a pure function of the request") {
  MockScorer scorer;
  ScoreRequest request{.prompt = "what is a monad", .response = "a monoid in disguise"};
  auto first = scorer.score(request);
  for (int i = 0; i < 100; ++i) {
    auto again = scorer.score(request);
    CHECK(again.score == first.score);
    CHECK(again.latency_ms == 0);
  }
  CHECK(first.score >= 0.0);
  CHECK(first.score < 1.0);

  // different requests land on different scores
  auto other = scorer.score({.prompt = "what is a monad", .response = "a burrito"});
  CHECK(other.score != first.score);

  // the field boundary is part of the hash: ("ab","c") and ("a","bc")
  // concatenate identically but must not collide
  auto ab_c = scorer.score({.prompt = "ab", .response = "c"});
  auto a_bc = scorer.score({.prompt = "a", .response = "bc"});
  CHECK(ab_c.score != a_bc.score);
}

TEST_CASE("mock scorer rejects empty fields") {
  MockScorer scorer;
  CHECK_THROWS_AS(scorer.score({.prompt = "", .response = "x"}), ArgumentError);
  CHECK_THROWS_AS(scorer.score({.prompt = "x", .response = ""}), ArgumentError);
}

namespace {

std::vector<ScoreRequest> numbered_requests(int n) {
  std::vector<ScoreRequest> requests;
  requests.reserve(n);
  for (int i = 0; i < n; ++i) {
    requests.push_back({.prompt = "prompt " + std::to_string(i),
                        .response = "response " + std::to_string(i)});
  }
  return requests;
}

/// Scorer that fails on a fixed set of request indices (parsed back out of
/// the response text) and counts every call. Safe to call concurrently.
struct FailingScorer : Scorer {
  std::vector<int> fail_at;
  std::atomic<int> calls{0};
  ScoreResponse score(const ScoreRequest& request) override {
    calls.fetch_add(1);
    int index = std::stoi(request.response.substr(std::string("response ").size()));
    for (int f : fail_at) {
      if (index == f) throw TransportError("synthetic failure", 1, 500);
    }
    return {.score = static_cast<double>(index), .latency_ms = 0};
  }
};

/// Scorer that records the highest number of simultaneous callers it saw.
struct ConcurrencyProbe : Scorer {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  ScoreResponse score(const ScoreRequest&) override {
    int now = in_flight.fetch_add(1) + 1;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    in_flight.fetch_sub(1);
    return {.score = 0.5, .latency_ms = 0};
  }
};

}  // namespace

TEST_CASE("score_batch keeps request order at any concurrency") {
  MockScorer scorer;
  auto requests = numbered_requests(40);

  std::vector<ScoreResponse> sequential;
  for (const auto& r : requests) sequential.push_back(scorer.score(r));

  for (int width : {1, 8}) {
    auto batch = score_batch(scorer, requests, width);
    REQUIRE(batch.size() == sequential.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(batch[i].score == sequential[i].score);
    }
  }

  CHECK(score_batch(scorer, std::vector<ScoreRequest>{}, 4).empty());
  CHECK_THROWS_AS(score_batch(scorer, requests, 0), ArgumentError);
  CHECK_THROWS_AS(score_batch(scorer, requests, -3), ArgumentError);
}

TEST_CASE("score_batch reports the lowest failing index") {
  auto requests = numbered_requests(12);

  SUBCASE("sequentially, later requests are never started") {
    FailingScorer scorer;
    scorer.fail_at = {5, 2};
    try {
      score_batch(scorer, requests, 1);
      FAIL("expected BatchScoreError");
    } catch (const BatchScoreError& e) {
      CHECK(e.failed_index() == 2);
      CHECK(std::string(e.what()).find("request 2") != std::string::npos);
      CHECK(std::string(e.what()).find("synthetic failure") != std::string::npos);
    }
    CHECK(scorer.calls.load() == 3);  // 0, 1, then the failure
  }

  SUBCASE("concurrently, the earliest failure wins") {
    // Request 2 is always claimed before request 5 (indices are handed out
    // through one counter), so even when 5 fails first the batch error must
    // still name 2 after the joins.
    FailingScorer scorer;
    scorer.fail_at = {5, 2};
    try {
      score_batch(scorer, requests, 8);
      FAIL("expected BatchScoreError");
    } catch (const BatchScoreError& e) {
      CHECK(e.failed_index() == 2);
    }
  }
}

TEST_CASE("score_batch honours the in-flight ceiling") {
  ConcurrencyProbe probe;
  auto requests = numbered_requests(32);
  auto results = score_batch(probe, requests, 4);
  CHECK(results.size() == 32);
  CHECK(probe.peak.load() <= 4);
  CHECK(probe.in_flight.load() == 0);
}

namespace {

/// An httplib server bound to an ephemeral loopback port for one test.
struct StubServer {
  httplib::Server server;
  int port = 0;
  std::thread runner;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    runner = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    REQUIRE(server.is_running());
  }

  ~StubServer() {
    server.stop();
    if (runner.joinable()) runner.join();
  }

  std::string endpoint(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port) + prefix;
  }
};

const RetryPolicy kFastRetries{.max_attempts = 3,
                               .initial_backoff = std::chrono::milliseconds(1),
                               .backoff_multiplier = 2.0};

}  // namespace

TEST_CASE("remote scorer round-trips a score") {
  StubServer stub;
  nlohmann::json seen;
  std::string seen_content_type;
  stub.server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body, nullptr, false);
    seen_content_type = req.get_header_value("Content-Type");
    res.set_content(R"({"score": 0.42})", "application/json");
  });
  stub.start();

  RemoteScorer scorer(stub.endpoint(), kFastRetries);
  auto response = scorer.score({.prompt = "p text", .response = "r text"});
  CHECK(response.score == 0.42);
  CHECK(response.latency_ms >= 0);

  REQUIRE(seen.is_object());
  CHECK(seen["prompt"] == "p text");
  CHECK(seen["response"] == "r text");
  CHECK(seen_content_type == "application/json");
}

TEST_CASE("remote scorer honours a path prefix") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server.Post("/api/v2/score", [&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    res.set_content(R"({"score": 1})", "application/json");
  });
  stub.start();

  // trailing slashes on the endpoint collapse into the same route
  RemoteScorer scorer(stub.endpoint("/api/v2/"), kFastRetries);
  CHECK(scorer.score({.prompt = "p", .response = "r"}).score == 1.0);
  CHECK(hits.load() == 1);
}

TEST_CASE("remote scorer retries transient failures") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    if (hits.fetch_add(1) < 2) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
    } else {
      res.set_content(R"({"score": 0.75})", "application/json");
    }
  });
  stub.start();

  RemoteScorer scorer(stub.endpoint(), kFastRetries);
  auto response = scorer.score({.prompt = "p", .response = "r"});
  CHECK(response.score == 0.75);
  CHECK(hits.load() == 3);
}

TEST_CASE("remote scorer gives up after the retry budget") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    res.status = 500;
    res.set_content("nope", "text/plain");
  });
  stub.start();

  RemoteScorer scorer(stub.endpoint(), kFastRetries);
  try {
    scorer.score({.prompt = "p", .response = "r"});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.last_status() == 500);
    CHECK(std::string(e.what()).find("HTTP status 500") != std::string::npos);
  }
  CHECK(hits.load() == 3);
}

TEST_CASE("remote scorer treats malformed bodies as failures") {
  StubServer stub;
  stub.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("score: yes", "text/plain");
  });
  stub.start();

  RemoteScorer scorer(stub.endpoint(), kFastRetries);
  try {
    scorer.score({.prompt = "p", .response = "r"});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.last_status() == 200);  // the server answered; the payload was junk
    CHECK(std::string(e.what()).find("malformed") != std::string::npos);
  }

  StubServer wrong_type;
  wrong_type.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"score": "high"})", "application/json");
  });
  wrong_type.start();
  RemoteScorer other(wrong_type.endpoint(), kFastRetries);
  CHECK_THROWS_AS(other.score({.prompt = "p", .response = "r"}), TransportError);
}

TEST_CASE("remote scorer reports connection failures with status 0") {
  int dead_port;
  {
    StubServer stub;
    stub.start();
    dead_port = stub.port;
  }  // server gone; the port is now closed

  RemoteScorer scorer("http://127.0.0.1:" + std::to_string(dead_port),
                      RetryPolicy{.max_attempts = 2,
                                  .initial_backoff = std::chrono::milliseconds(1),
                                  .backoff_multiplier = 2.0});
  try {
    scorer.score({.prompt = "p", .response = "r"});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 2);
    CHECK(e.last_status() == 0);
  }
}

TEST_CASE("remote scorer validates its endpoint") {
  CHECK_THROWS_AS(RemoteScorer("https://secure.example"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("ftp://example"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("example:8080"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://host:notaport"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://host:0"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://host:65536"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://host:99999999999999999999"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://:8080"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://"), ArgumentError);
  CHECK_THROWS_AS(RemoteScorer("http://host", RetryPolicy{.max_attempts = 0,
                                                          .initial_backoff = {},
                                                          .backoff_multiplier = 1.0}),
                  ArgumentError);
  // valid shapes construct without touching the network
  CHECK_NOTHROW(RemoteScorer("http://host"));
  CHECK_NOTHROW(RemoteScorer("http://host:8080/deep/prefix"));
}
