#include "divkit/scorer.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace divkit {
namespace {

void check_request(const ScoreRequest& request) {
  if (request.prompt.empty()) throw ArgumentError("score request has an empty prompt");
  if (request.response.empty()) throw ArgumentError("score request has an empty response");
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a_update(std::uint64_t h, const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

ScoreResponse MockScorer::score(const ScoreRequest& request) {
  check_request(request);
  // Hash the length-prefixed prompt followed by the response so that the pairs
  // ("ab", "c") and ("a", "bc") cannot collide.
  std::uint64_t h = kFnvOffset;
  std::uint64_t prompt_len = request.prompt.size();
  unsigned char len_le[8];
  for (int i = 0; i < 8; ++i) len_le[i] = static_cast<unsigned char>((prompt_len >> (8 * i)) & 0xff);
  h = fnv1a_update(h, len_le, sizeof len_le);
  h = fnv1a_update(h, request.prompt.data(), request.prompt.size());
  h = fnv1a_update(h, request.response.data(), request.response.size());
  return {.score = static_cast<double>(h >> 11) * 0x1.0p-53, .latency_ms = 0};
}

RemoteScorer::RemoteScorer(const std::string& endpoint, RetryPolicy policy)
    : policy_(policy) {
  if (policy_.max_attempts < 1) throw ArgumentError("retry policy needs at least one attempt");
  const std::string scheme = "http://";
  if (endpoint.rfind(scheme, 0) != 0)
    throw ArgumentError("scorer endpoint must start with http://, got \"" + endpoint + "\"");
  std::string rest = endpoint.substr(scheme.size());
  std::string authority = rest;
  path_.clear();
  if (auto slash = rest.find('/'); slash != std::string::npos) {
    authority = rest.substr(0, slash);
    path_ = rest.substr(slash);
    while (path_.size() > 1 && path_.back() == '/') path_.pop_back();
    if (path_ == "/") path_.clear();
  }
  port_ = 80;
  if (auto colon = authority.find(':'); colon != std::string::npos) {
    host_ = authority.substr(0, colon);
    std::string port_text = authority.substr(colon + 1);
    try {
      std::size_t used = 0;
      int port = std::stoi(port_text, &used);
      if (used != port_text.size() || port < 1 || port > 65535) throw std::invalid_argument("");
      port_ = port;
    } catch (const std::exception&) {
      throw ArgumentError("scorer endpoint has an invalid port: \"" + port_text + "\"");
    }
  } else {
    host_ = authority;
  }
  if (host_.empty()) throw ArgumentError("scorer endpoint has an empty host: \"" + endpoint + "\"");
}

ScoreResponse RemoteScorer::score(const ScoreRequest& request) {
  check_request(request);
  nlohmann::json body = {{"prompt", request.prompt}, {"response", request.response}};
  const std::string payload = body.dump();
  const std::string path = path_ + "/score";

  auto started = std::chrono::steady_clock::now();
  int last_status = 0;
  std::string last_detail;
  auto backoff = std::chrono::duration<double, std::milli>(policy_.initial_backoff);
  for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= policy_.backoff_multiplier;
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    auto result = client.Post(path, payload, "application/json");
    if (!result) {
      last_status = 0;
      last_detail = "connection failed (" + httplib::to_string(result.error()) + ")";
      continue;
    }
    last_status = result->status;
    if (result->status < 200 || result->status >= 300) {
      last_detail = "HTTP status " + std::to_string(result->status);
      continue;
    }
    nlohmann::json parsed = nlohmann::json::parse(result->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("score") ||
        !parsed["score"].is_number()) {
      last_detail = "malformed score payload";
      continue;
    }
    auto elapsed = std::chrono::steady_clock::now() - started;
    return {.score = parsed["score"].get<double>(),
            .latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()};
  }
  throw TransportError("scoring via " + host_ + ":" + std::to_string(port_) + path + " failed after " +
                           std::to_string(policy_.max_attempts) + " attempts: " + last_detail,
                       policy_.max_attempts, last_status);
}

std::vector<ScoreResponse> score_batch(Scorer& scorer, std::span<const ScoreRequest> requests,
                                       int max_in_flight) {
  if (max_in_flight < 1) throw ArgumentError("max_in_flight must be at least 1");
  std::vector<ScoreResponse> results(requests.size());
  if (requests.empty()) return results;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex failure_mutex;
  std::size_t failed_index = requests.size();
  std::string failure_reason;

  auto worker = [&] {
    while (!stop.load(std::memory_order_acquire)) {
      std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= requests.size()) return;
      try {
        results[i] = scorer.score(requests[i]);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        // Keep the lowest failing index; a request issued earlier can fail
        // after one issued later has already been recorded.
        if (i < failed_index) {
          failed_index = i;
          failure_reason = e.what();
        }
        stop.store(true, std::memory_order_release);
        return;
      }
    }
  };

  std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), requests.size());
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
  for (auto& t : workers) t.join();

  if (failed_index < requests.size()) {
    throw BatchScoreError(
        "batch scoring failed at request " + std::to_string(failed_index) + ": " + failure_reason,
        failed_index);
  }
  return results;
}

}  // namespace divkit
