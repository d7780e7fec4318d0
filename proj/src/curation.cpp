#include "divkit/curation.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "divkit/rng.hpp"

namespace divkit {

BudgetPlan plan_budget(std::uint64_t annotation_budget, std::span<const int> ranking_lengths) {
  if (annotation_budget == 0) throw ArgumentError("annotation budget must be positive");
  if (ranking_lengths.empty()) throw ArgumentError("no ranking lengths given");
  std::vector<int> lengths(ranking_lengths.begin(), ranking_lengths.end());
  std::sort(lengths.begin(), lengths.end());
  BudgetPlan plan{.annotation_budget = annotation_budget, .allocations = {}};
  plan.allocations.reserve(lengths.size());
  int previous = 0;
  for (int k : lengths) {
    if (k < 2) throw ArgumentError("ranking length must be at least 2, got " + std::to_string(k));
    if (k == previous) throw ArgumentError("duplicate ranking length " + std::to_string(k));
    previous = k;
    if (annotation_budget % static_cast<std::uint64_t>(k) != 0) {
      throw ArgumentError("annotation budget " + std::to_string(annotation_budget) +
                          " is not divisible by ranking length " + std::to_string(k));
    }
    plan.allocations.push_back({.size = annotation_budget / static_cast<std::uint64_t>(k),
                                .ranking_length = k});
  }
  return plan;
}

std::map<SubsetKey, std::vector<PreferenceSample>> build_nested_subsets(
    std::span<const PreferenceSample> corpus, std::span<const SubsetKey> cells,
    std::uint64_t seed) {
  for (const auto& cell : cells) {
    if (cell.size == 0) throw ConstructionError("subset size must be positive");
    if (cell.size > corpus.size()) {
      throw ConstructionError("subset size " + std::to_string(cell.size) +
                              " exceeds corpus size " + std::to_string(corpus.size()));
    }
    if (cell.ranking_length < 2) {
      throw ConstructionError("ranking length must be at least 2, got " +
                              std::to_string(cell.ranking_length));
    }
  }

  // One permutation serves every cell, which is what makes the subsets nest.
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::map<SubsetKey, std::vector<PreferenceSample>> result;
  for (const auto& cell : cells) {
    if (result.contains(cell)) continue;
    auto k = static_cast<std::size_t>(cell.ranking_length);
    std::vector<PreferenceSample> subset;
    subset.reserve(cell.size);
    for (std::uint64_t i = 0; i < cell.size; ++i) {
      const PreferenceSample& source = corpus[order[i]];
      if (source.responses.size() < k) {
        throw ConstructionError("sample " + source.id + " has " +
                                std::to_string(source.responses.size()) +
                                " responses, need " + std::to_string(k));
      }
      PreferenceSample cut;
      cut.id = source.id;
      cut.prompt = source.prompt;
      cut.responses.assign(source.responses.begin(), source.responses.begin() + k);
      if (source.rewards) {
        cut.rewards.emplace(source.rewards->begin(), source.rewards->begin() + k);
      }
      subset.push_back(std::move(cut));
    }
    result.emplace(cell, std::move(subset));
  }
  return result;
}

PreferenceSample rerank_sample(const PreferenceSample& sample, Scorer& scorer) {
  if (sample.responses.empty())
    throw ArgumentError("sample " + sample.id + " has no responses to rank");
  std::vector<double> scores;
  scores.reserve(sample.responses.size());
  for (const std::string& response : sample.responses) {
    try {
      scores.push_back(scorer.score({.prompt = sample.prompt, .response = response}).score);
    } catch (const std::exception& e) {
      throw ScoringError("re-ranking sample " + sample.id + " failed: " + e.what());
    }
  }
  std::vector<std::size_t> order(sample.responses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PreferenceSample ranked;
  ranked.id = sample.id;
  ranked.prompt = sample.prompt;
  ranked.responses.reserve(order.size());
  ranked.rewards.emplace();
  ranked.rewards->reserve(order.size());
  for (std::size_t i : order) {
    ranked.responses.push_back(sample.responses[i]);
    ranked.rewards->push_back(scores[i]);
  }
  return ranked;
}

double jaccard_index(const NGramBag& a, const NGramBag& b) {
  if (a.order() != b.order()) {
    throw ArgumentError("cannot intersect gram bags of order " + std::to_string(a.order()) +
                        " and " + std::to_string(b.order()));
  }
  if (a.empty() && b.empty()) throw DegenerateInputError("jaccard index of two empty gram bags");
  const auto& small = a.unique() <= b.unique() ? a.counts() : b.counts();
  const auto& large = a.unique() <= b.unique() ? b.counts() : a.counts();
  std::uint64_t intersection = 0;
  for (const auto& [gram, count] : small) {
    (void)count;
    if (large.contains(gram)) ++intersection;
  }
  std::uint64_t unions = a.unique() + b.unique() - intersection;
  return static_cast<double>(intersection) / static_cast<double>(unions);
}

namespace {

NGramBag prompt_bag(const PreferenceSample& sample, int order, const Tokenizer& tokenizer) {
  return extract_ngrams(tokenizer ? tokenizer(sample.prompt) : tokenize(sample.prompt), order);
}

}  // namespace

AugmentationResult augment_dataset(std::span<const PreferenceSample> dataset,
                                   std::span<const PreferenceSample> pool,
                                   const AugmentationConfig& config,
                                   const Tokenizer& tokenizer) {
  if (config.count == 0) throw ArgumentError("augmentation count must be positive");
  if (config.n_support < 1) throw ArgumentError("n_support must be at least 1");
  if (config.batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (config.ngram_order < 1) throw ArgumentError("ngram order must be at least 1");
  if (dataset.empty()) throw ArgumentError("cannot augment an empty dataset");
  if (static_cast<std::size_t>(config.n_support) > dataset.size()) {
    throw ArgumentError("n_support " + std::to_string(config.n_support) +
                        " exceeds dataset size " + std::to_string(dataset.size()));
  }

  std::unordered_set<std::string> seen_ids;
  seen_ids.reserve(dataset.size() + pool.size());
  for (const auto& sample : dataset) {
    if (!seen_ids.insert(sample.id).second)
      throw ValidationError("duplicate sample id " + sample.id + " in dataset");
  }
  for (const auto& sample : pool) {
    if (!seen_ids.insert(sample.id).second)
      throw ValidationError("duplicate sample id " + sample.id + " in candidate pool");
  }

  AugmentationResult result;
  result.dataset.assign(dataset.begin(), dataset.end());
  result.trace.reserve(config.count);

  std::vector<NGramBag> dataset_bags;
  dataset_bags.reserve(dataset.size() + config.count);
  for (const auto& sample : dataset)
    dataset_bags.push_back(prompt_bag(sample, config.ngram_order, tokenizer));
  std::vector<NGramBag> pool_bags;
  pool_bags.reserve(pool.size());
  for (const auto& sample : pool)
    pool_bags.push_back(prompt_bag(sample, config.ngram_order, tokenizer));

  std::vector<std::size_t> alive(pool.size());
  std::iota(alive.begin(), alive.end(), 0);
  Rng rng(config.seed);

  std::vector<std::size_t> support_index;
  for (std::uint64_t added = 0; added < config.count; ++added) {
    if (alive.empty()) {
      throw AugmentationUnderflowError(
          "candidate pool exhausted after adding " + std::to_string(added) + " of " +
              std::to_string(config.count) + " prompts",
          added, config.count);
    }

    support_index.resize(result.dataset.size());
    std::iota(support_index.begin(), support_index.end(), 0);
    rng.shuffle_prefix(support_index, static_cast<std::size_t>(config.n_support));

    AugmentationStep step;
    NGramBag reference(config.ngram_order);
    for (int s = 0; s < config.n_support; ++s) {
      std::size_t idx = support_index[static_cast<std::size_t>(s)];
      reference.merge(dataset_bags[idx]);
      step.support_ids.push_back(result.dataset[idx].id);
    }

    std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                              alive.size());
    rng.shuffle_prefix(alive, batch);

    std::size_t best_slot = 0;
    for (std::size_t c = 0; c < batch; ++c) {
      std::size_t pool_index = alive[c];
      double j = jaccard_index(reference, pool_bags[pool_index]);
      step.candidates.push_back({.pool_index = pool_index, .jaccard = j});
      const CandidateEval& best = step.candidates[best_slot];
      const CandidateEval& cur = step.candidates[c];
      if (cur.jaccard < best.jaccard ||
          (cur.jaccard == best.jaccard && cur.pool_index < best.pool_index)) {
        best_slot = c;
      }
    }

    std::size_t selected = step.candidates[best_slot].pool_index;
    step.selected_pool_index = selected;
    result.dataset.push_back(pool[selected]);
    dataset_bags.push_back(pool_bags[selected]);
    std::swap(alive[best_slot], alive.back());
    alive.pop_back();
    result.trace.push_back(std::move(step));
  }
  return result;
}

}  // namespace divkit
