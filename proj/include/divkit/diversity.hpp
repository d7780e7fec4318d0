#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "divkit/corpus.hpp"

namespace divkit {

/// Prompt-diversity measurement: value = unique_rate * prompt_count^decay.
/// The value is always recomputable from the other three fields.
struct DiversityScore {
  double unique_rate;         // distinct-gram fraction of the prompt corpus
  std::uint64_t prompt_count; // samples counted, duplicates included
  double decay;               // exponent damping the prompt-count term
  double value;
};

/// Diversity of a prompt corpus at a given decay exponent. decay must lie in
/// (0, 1]; prompt_count >= 1; the bag must be non-empty. At decay = 1 the
/// value reduces exactly to unique_rate * prompt_count.
DiversityScore diversity_score(const NGramBag& bag, std::uint64_t prompt_count,
                               double decay);

struct FitPoint {
  double diversity;
  double score;
};

/// Ordinary least squares for score = slope * diversity + intercept.
struct FitResult {
  double slope;      // alpha
  double intercept;  // beta
  double mse;        // mean of squared residuals
  std::vector<double> residuals;
};

/// OLS fit. Needs at least two points with at least two distinct diversity
/// values; otherwise throws DegenerateFitError.
FitResult linear_fit(std::span<const FitPoint> points);

/// One corpus measured for the decay search: its prompt gram bag and how
/// many prompts produced it.
struct CorpusMeasure {
  NGramBag bag;
  std::uint64_t prompt_count;
};

struct GridSearchConfig {
  double step = 0.05;            // grid spacing l; candidates are l, 2l, ...
  bool require_ascending = true; // demand an ascending diversity profile
  bool strict_ascending = false; // if true, equal neighbors are not ascending
  double p_max = 1.0;            // inclusive upper end of the grid
};

struct GridPoint {
  double decay;
  std::optional<double> mse;  // empty when the fit was degenerate
  bool ascending;
};

struct GridSearchResult {
  double decay;  // chosen exponent (smallest among MSE ties)
  double mse;    // its fit MSE
  std::vector<GridPoint> grid;
};

/// Grid search for the decay exponent: evaluates every candidate in
/// {step, 2*step, ..., p_max}, fits score against diversity at each, and
/// returns the candidate with the smallest MSE among those whose diversity
/// profile is ascending (when required). Ties resolve to the smallest
/// candidate. Corpora must come with strictly ascending prompt counts and
/// one score each; at least three are required.
GridSearchResult search_decay_index(std::span<const CorpusMeasure> corpora,
                                    std::span<const double> scores,
                                    const GridSearchConfig& config = {});

}  // namespace divkit
