#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divkit/errors.hpp"

namespace divkit {

struct ScoreRequest {
  std::string prompt;
  std::string response;
};

struct ScoreResponse {
  double score;
  std::int64_t latency_ms;
};

/// Reward-scorer interface. Implementations must tolerate concurrent score()
/// calls; score_batch issues them from several threads.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScoreResponse score(const ScoreRequest& request) = 0;
};

/// Deterministic stand-in scorer: a stable 64-bit hash of (prompt, response)
/// mapped into [0, 1). Pure, never fails, zero latency.
class MockScorer : public Scorer {
 public:
  ScoreResponse score(const ScoreRequest& request) override;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double backoff_multiplier = 2.0;
};

/// HTTP client for a remote reward model. POSTs {"prompt", "response"} to
/// <endpoint>/score and expects {"score": number}. Connection failures,
/// non-2xx statuses, and malformed bodies are retried with exponential
/// backoff; once the budget is spent a TransportError carries the attempt
/// count and last status. Each call opens its own connection, so concurrent
/// score() calls are safe.
class RemoteScorer : public Scorer {
 public:
  /// endpoint: "http://host[:port][/prefix]"
  explicit RemoteScorer(const std::string& endpoint, RetryPolicy policy = {});

  ScoreResponse score(const ScoreRequest& request) override;

 private:
  std::string host_;
  int port_;
  std::string path_;
  RetryPolicy policy_;
};

/// Score a list of requests with at most max_in_flight outstanding at once.
/// Responses come back in request order. Any terminal failure fails the
/// whole batch: no new requests are started, in-flight ones finish, partial
/// results are discarded, and a BatchScoreError reports the lowest failing
/// index. With max_in_flight = 1 the results are identical to sequential
/// score() calls.
std::vector<ScoreResponse> score_batch(Scorer& scorer,
                                       std::span<const ScoreRequest> requests,
                                       int max_in_flight);

}  // namespace divkit
