#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "divkit/errors.hpp"

namespace divkit {

/// Log-probability inputs for one ranked sample.
///   candidate_logprobs[k] — sequence log-probability of the k-th ranked
///                           response (index 0 = most preferred). Whether it
///                           is length-normalized is the caller's choice; the
///                           raw token-logprob sum is the recommended
///                           convention.
///   top_token_logprobs    — per-token log-probabilities of the top response,
///                           consumed by the supervised term.
/// All entries must be finite.
struct RankingLogProbs {
  std::vector<double> candidate_logprobs;
  std::vector<double> top_token_logprobs;
};

/// Contrast temperatures for a ranking of n candidates.
/// Row k (0-based, k < n-1) holds the temperatures of the contrast that pits
/// candidate k against candidates k..n-1. Off-diagonal entries are the
/// reciprocal reward gaps; the diagonal entry is the row minimum.
class TemperatureMatrix {
 public:
  /// All-equal temperatures, for isolating the softmax-contrast behavior.
  static TemperatureMatrix uniform(std::size_t ranking_size, double value);

  std::size_t ranking_size() const { return size_; }

  /// Temperature for contrast row k and candidate i; requires
  /// k < ranking_size()-1 and k <= i < ranking_size().
  double at(std::size_t k, std::size_t i) const;

 private:
  friend TemperatureMatrix pro_temperatures(std::span<const double> rewards);
  TemperatureMatrix(std::size_t size, std::vector<std::vector<double>> rows)
      : size_(size), rows_(std::move(rows)) {}

  std::size_t size_;
  std::vector<std::vector<double>> rows_;  // rows_[k][i - k]
};

/// Reward gaps below this are clamped so tied rewards yield a finite (very
/// large) temperature instead of a division by zero.
inline constexpr double kRewardGapEpsilon = 1e-6;

/// Temperatures from a non-increasing reward list (length >= 2). Rewards
/// that increase anywhere contradict the ranking and raise OrderingError.
/// Depends only on reward differences, so a constant shift changes nothing.
TemperatureMatrix pro_temperatures(std::span<const double> rewards);

/// Supervised loss on the top candidate: the negated sum of its token
/// log-probabilities, without length normalization. Entries must be <= 0.
double sft_loss(std::span<const double> top_token_logprobs);

/// Ranking loss: one-to-many softmax contrasts, summed over contrast rows
/// k = 0..n-2, each computed with max-subtracted log-sum-exp. Non-negative.
double pro_ranking_loss(const RankingLogProbs& logprobs,
                        const TemperatureMatrix& temps);

/// Combined objective: beta * sft_loss + pro_ranking_loss. beta >= 0.
double pro_loss(const RankingLogProbs& logprobs, const TemperatureMatrix& temps,
                double beta);

/// Loss value with its analytic gradients (softmax closed forms).
struct ProLossBreakdown {
  double total;
  double sft;
  double ranking;
  std::vector<double> candidate_gradient;  // d total / d candidate_logprobs[i]
  std::vector<double> token_gradient;      // d total / d top_token_logprobs[i]
};

ProLossBreakdown pro_loss_with_gradients(const RankingLogProbs& logprobs,
                                         const TemperatureMatrix& temps,
                                         double beta);

/// Central-finite-difference cross-check of the analytic gradients.
/// relative error = |analytic - fd| / max(|analytic|, |fd|), falling back to
/// the absolute difference when both are below 1e-8.
struct FiniteDifferenceCheck {
  std::vector<double> candidate_fd;
  std::vector<double> token_fd;
  double max_relative_error;
};

FiniteDifferenceCheck finite_difference_check(const RankingLogProbs& logprobs,
                                              const TemperatureMatrix& temps,
                                              double beta, double step = 1e-5);

}  // namespace divkit
