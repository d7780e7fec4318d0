#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "divkit/errors.hpp"

namespace divkit {

/// One prompt with an ordered ranking of responses. Position 0 is the most
/// preferred response. When rewards are present they are parallel to
/// responses; after re-ranking they are non-increasing.
struct PreferenceSample {
  std::string id;
  std::string prompt;
  std::vector<std::string> responses;
  std::optional<std::vector<double>> rewards;
};

/// Tokens are non-empty and contain no whitespace.
using TokenSequence = std::vector<std::string>;

/// Pluggable tokenizer hook. An empty function means "use tokenize()".
using Tokenizer = std::function<TokenSequence(std::string_view)>;

/// Default tokenizer: lowercases ASCII letters and splits on any run of
/// bytes that is neither ASCII alphanumeric nor part of a multi-byte UTF-8
/// sequence (bytes >= 0x80 are kept, so non-Latin text stays in one piece).
/// Deterministic and locale-independent.
TokenSequence tokenize(std::string_view text);

/// Multiset of n-token grams with total and distinct counts. Grams from
/// separate documents never span a boundary: each document is windowed on
/// its own via add_document(), and bags are combined with merge().
class NGramBag {
 public:
  explicit NGramBag(int order);

  int order() const { return order_; }

  /// Slide an order()-wide window over one document's tokens.
  void add_document(const TokenSequence& tokens);

  /// Insert one gram with a multiplicity. gram must have exactly order()
  /// tokens, each non-empty and whitespace-free.
  void insert(const TokenSequence& gram, std::uint64_t count = 1);

  /// Combine with another bag of the same order. Commutative and
  /// associative in both total and distinct counts.
  void merge(const NGramBag& other);

  std::uint64_t total() const { return total_; }
  std::uint64_t unique() const { return counts_.size(); }
  bool empty() const { return total_ == 0; }

  /// Gram -> multiplicity. Keys are the gram's tokens joined with a single
  /// space, which is collision-free because tokens carry no whitespace.
  const std::unordered_map<std::string, std::uint64_t>& counts() const {
    return counts_;
  }

 private:
  int order_;
  std::uint64_t total_ = 0;
  std::unordered_map<std::string, std::uint64_t> counts_;
};

/// All contiguous n-token windows of one token sequence. order must be >= 1;
/// a sequence shorter than order yields an empty bag.
NGramBag extract_ngrams(const TokenSequence& tokens, int order);

/// Fraction of grams that are distinct, |Filter(G)| / |G|, in (0, 1].
/// Throws DegenerateInputError on an empty bag.
double unique_rate(const NGramBag& bag);

/// Gram bag over the prompts of a corpus (responses are excluded). Each
/// prompt is tokenized and windowed on its own, then merged.
NGramBag prompt_ngram_bag(std::span<const PreferenceSample> samples, int order,
                          const Tokenizer& tokenizer = {});

/// Read a JSONL preference corpus. One object per line:
///   {"id": string?, "prompt": string, "responses": [string, ...],
///    "rewards": [number, ...]?}
/// Samples are returned in file order. A missing "id" is synthesized as
/// "line-<k>" from the 1-based line number. Blank lines are skipped.
std::vector<PreferenceSample> load_jsonl(const std::filesystem::path& path);

/// Write samples as JSONL in the same schema. Ids are always written.
void save_jsonl(const std::filesystem::path& path,
                std::span<const PreferenceSample> samples);

}  // namespace divkit
