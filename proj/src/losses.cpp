#include "divkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace divkit {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ArgumentError(std::string(what) + " contains a non-finite entry");
    }
  }
}

}  // namespace

TemperatureMatrix TemperatureMatrix::uniform(std::size_t ranking_size,
                                             double value) {
  if (ranking_size < 2) {
    throw ArgumentError("temperature matrix needs a ranking of >= 2");
  }
  if (!(value > 0.0)) throw ArgumentError("temperatures must be positive");
  std::vector<std::vector<double>> rows(ranking_size - 1);
  for (std::size_t k = 0; k + 1 < ranking_size; ++k) {
    rows[k].assign(ranking_size - k, value);
  }
  return TemperatureMatrix(ranking_size, std::move(rows));
}

double TemperatureMatrix::at(std::size_t k, std::size_t i) const {
  if (k + 1 >= size_ || i < k || i >= size_) {
    throw ArgumentError("temperature index (" + std::to_string(k) + ", " +
                        std::to_string(i) + ") out of range for ranking of " +
                        std::to_string(size_));
  }
  return rows_[k][i - k];
}

TemperatureMatrix pro_temperatures(std::span<const double> rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) {
    throw ArgumentError("temperatures need at least 2 rewards, got " +
                        std::to_string(n));
  }
  require_finite(rewards, "rewards");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (rewards[i + 1] > rewards[i]) {
      throw OrderingError("rewards increase at position " +
                          std::to_string(i + 1) +
                          "; ranking and rewards disagree");
    }
  }

  std::vector<std::vector<double>> rows(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    rows[k].resize(n - k);
    double row_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = k + 1; i < n; ++i) {
      double t = 1.0 / std::max(rewards[k] - rewards[i], kRewardGapEpsilon);
      rows[k][i - k] = t;
      row_min = std::min(row_min, t);
    }
    rows[k][0] = row_min;
  }
  return TemperatureMatrix(n, std::move(rows));
}

double sft_loss(std::span<const double> top_token_logprobs) {
  if (top_token_logprobs.empty()) {
    throw ArgumentError("sft loss needs at least one token log-probability");
  }
  require_finite(top_token_logprobs, "token log-probabilities");
  double loss = 0.0;
  for (double lp : top_token_logprobs) {
    if (lp > 0.0) {
      throw DomainError("token log-probability " + std::to_string(lp) +
                        " is positive");
    }
    loss += -lp;
  }
  return loss;
}

namespace {

// One contrast row: returns log-sum-exp(z_k..z_{n-1}) - z_k where
// z_i = logprob_i / T(k, i). Writes the scaled scores into `scaled`.
double contrast_term(std::span<const double> logprobs,
                     const TemperatureMatrix& temps, std::size_t k,
                     std::vector<double>& scaled) {
  const std::size_t n = logprobs.size();
  scaled.clear();
  double z_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = k; i < n; ++i) {
    double z = logprobs[i] / temps.at(k, i);
    scaled.push_back(z);
    z_max = std::max(z_max, z);
  }
  double sum = 0.0;
  for (double z : scaled) sum += std::exp(z - z_max);
  double lse = z_max + std::log(sum);
  return lse - scaled.front();
}

void check_ranking_inputs(const RankingLogProbs& logprobs,
                          const TemperatureMatrix& temps) {
  const std::size_t n = logprobs.candidate_logprobs.size();
  if (n < 2) {
    throw ArgumentError("ranking loss needs at least 2 candidates, got " +
                        std::to_string(n));
  }
  if (temps.ranking_size() != n) {
    throw ArgumentError("temperature matrix is sized for a ranking of " +
                        std::to_string(temps.ranking_size()) + ", inputs have " +
                        std::to_string(n));
  }
  require_finite(logprobs.candidate_logprobs, "candidate log-probabilities");
}

}  // namespace

double pro_ranking_loss(const RankingLogProbs& logprobs,
                        const TemperatureMatrix& temps) {
  check_ranking_inputs(logprobs, temps);
  const std::size_t n = logprobs.candidate_logprobs.size();
  std::vector<double> scaled;
  scaled.reserve(n);
  double loss = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    loss += contrast_term(logprobs.candidate_logprobs, temps, k, scaled);
  }
  return loss;
}

double pro_loss(const RankingLogProbs& logprobs, const TemperatureMatrix& temps,
                double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ArgumentError("beta must be finite and >= 0");
  }
  return beta * sft_loss(logprobs.top_token_logprobs) +
         pro_ranking_loss(logprobs, temps);
}

ProLossBreakdown pro_loss_with_gradients(const RankingLogProbs& logprobs,
                                         const TemperatureMatrix& temps,
                                         double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ArgumentError("beta must be finite and >= 0");
  }
  check_ranking_inputs(logprobs, temps);
  const std::size_t n = logprobs.candidate_logprobs.size();

  ProLossBreakdown out;
  out.sft = sft_loss(logprobs.top_token_logprobs);
  out.candidate_gradient.assign(n, 0.0);
  out.token_gradient.assign(logprobs.top_token_logprobs.size(), -beta);

  std::vector<double> scaled;
  scaled.reserve(n);
  out.ranking = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double z_max = -std::numeric_limits<double>::infinity();
    scaled.clear();
    for (std::size_t i = k; i < n; ++i) {
      double z = logprobs.candidate_logprobs[i] / temps.at(k, i);
      scaled.push_back(z);
      z_max = std::max(z_max, z);
    }
    double sum = 0.0;
    for (double z : scaled) sum += std::exp(z - z_max);
    double lse = z_max + std::log(sum);
    out.ranking += lse - scaled.front();
    for (std::size_t i = k; i < n; ++i) {
      double softmax = std::exp(scaled[i - k] - lse);
      double indicator = i == k ? 1.0 : 0.0;
      out.candidate_gradient[i] += (softmax - indicator) / temps.at(k, i);
    }
  }

  out.total = beta * out.sft + out.ranking;
  return out;
}

FiniteDifferenceCheck finite_difference_check(const RankingLogProbs& logprobs,
                                              const TemperatureMatrix& temps,
                                              double beta, double step) {
  if (!(step > 0.0)) throw ArgumentError("finite-difference step must be > 0");
  ProLossBreakdown analytic = pro_loss_with_gradients(logprobs, temps, beta);

  auto relative_error = [](double a, double f) {
    double denom = std::max(std::abs(a), std::abs(f));
    if (denom < 1e-8) return std::abs(a - f);
    return std::abs(a - f) / denom;
  };

  FiniteDifferenceCheck check;
  check.max_relative_error = 0.0;

  RankingLogProbs probe = logprobs;
  for (std::size_t i = 0; i < logprobs.candidate_logprobs.size(); ++i) {
    probe.candidate_logprobs[i] = logprobs.candidate_logprobs[i] + step;
    double up = pro_loss(probe, temps, beta);
    probe.candidate_logprobs[i] = logprobs.candidate_logprobs[i] - step;
    double down = pro_loss(probe, temps, beta);
    probe.candidate_logprobs[i] = logprobs.candidate_logprobs[i];
    double fd = (up - down) / (2.0 * step);
    check.candidate_fd.push_back(fd);
    check.max_relative_error =
        std::max(check.max_relative_error,
                 relative_error(analytic.candidate_gradient[i], fd));
  }
  for (std::size_t i = 0; i < logprobs.top_token_logprobs.size(); ++i) {
    probe.top_token_logprobs[i] = logprobs.top_token_logprobs[i] + step;
    double up = pro_loss(probe, temps, beta);
    probe.top_token_logprobs[i] = logprobs.top_token_logprobs[i] - step;
    double down = pro_loss(probe, temps, beta);
    probe.top_token_logprobs[i] = logprobs.top_token_logprobs[i];
    double fd = (up - down) / (2.0 * step);
    check.token_fd.push_back(fd);
    check.max_relative_error = std::max(
        check.max_relative_error, relative_error(analytic.token_gradient[i], fd));
  }
  return check;
}

}  // namespace divkit
