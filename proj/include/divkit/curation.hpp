#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "divkit/corpus.hpp"
#include "divkit/errors.hpp"
#include "divkit/scorer.hpp"

namespace divkit {

struct BudgetAllocation {
  std::uint64_t size;  ///< number of samples the budget buys at this length
  int ranking_length;
};

struct BudgetPlan {
  std::uint64_t annotation_budget;
  std::vector<BudgetAllocation> allocations;  ///< ascending ranking length
};

/// Split a fixed annotation budget across ranking lengths. A sample whose
/// responses are ranked k-deep costs k annotations, so each length gets
/// budget / k samples. The budget must divide evenly at every length;
/// otherwise an ArgumentError names the offending length.
BudgetPlan plan_budget(std::uint64_t annotation_budget, std::span<const int> ranking_lengths);

struct SubsetKey {
  std::uint64_t size;
  int ranking_length;
  auto operator<=>(const SubsetKey&) const = default;
};

/// Draw one subset per requested cell, all nested: a single seeded shuffle
/// of the corpus fixes the draw order, each cell takes the first `size`
/// samples of it, and each sample's responses (and rewards, if present) are
/// cut down to the first `ranking_length`. Consequently a smaller subset's
/// ids are always contained in a larger one's, and a shorter ranking is a
/// prefix of a longer one for the same sample.
std::map<SubsetKey, std::vector<PreferenceSample>> build_nested_subsets(
    std::span<const PreferenceSample> corpus, std::span<const SubsetKey> cells,
    std::uint64_t seed);

/// Re-score a sample's responses and reorder them by descending score
/// (stable: equal scores keep their original order). The scores become the
/// sample's rewards. Scorer failures surface as a ScoringError naming the
/// sample.
PreferenceSample rerank_sample(const PreferenceSample& sample, Scorer& scorer);

/// Jaccard index of two gram bags, computed over their deduplicated gram
/// sets. Both bags empty is undefined (DegenerateInputError); mixed orders
/// are an ArgumentError.
double jaccard_index(const NGramBag& a, const NGramBag& b);

struct AugmentationConfig {
  int n_support = 2;    ///< dataset prompts merged into the overlap reference
  int batch_size = 8;   ///< candidates drawn from the pool per step
  std::uint64_t count = 0;  ///< prompts to add
  int ngram_order = 2;
  std::uint64_t seed = 0;
};

struct CandidateEval {
  std::size_t pool_index;
  double jaccard;
};

/// One augmentation step, recorded so selections can be audited offline.
struct AugmentationStep {
  std::vector<std::string> support_ids;
  std::vector<CandidateEval> candidates;  ///< in draw order
  std::size_t selected_pool_index;
};

struct AugmentationResult {
  std::vector<PreferenceSample> dataset;
  std::vector<AugmentationStep> trace;
};

/// Grow a dataset from a candidate pool, preferring prompts that overlap
/// least with what is already there. Each step samples `n_support` prompts
/// from the current dataset, merges their gram bags into a reference, draws
/// `batch_size` candidates from the remaining pool, and admits the one with
/// the lowest Jaccard index against the reference (ties go to the lowest
/// pool index). Selected candidates leave the pool and immediately count as
/// dataset prompts for later steps. Runs out of pool before `count` prompts
/// are added -> AugmentationUnderflowError reporting the partial progress.
AugmentationResult augment_dataset(std::span<const PreferenceSample> dataset,
                                   std::span<const PreferenceSample> pool,
                                   const AugmentationConfig& config,
                                   const Tokenizer& tokenizer = {});

}  // namespace divkit
