#include "divkit/corpus.hpp"

#include <fstream>
#include <utility>

#include <json.hpp>

namespace divkit {

namespace {

bool is_token_byte(unsigned char c) {
  if (c >= '0' && c <= '9') return true;
  if (c >= 'a' && c <= 'z') return true;
  if (c >= 'A' && c <= 'Z') return true;
  return c >= 0x80;  // keep multi-byte UTF-8 sequences intact
}

std::string join_gram(const TokenSequence& tokens, std::size_t begin,
                      std::size_t count) {
  std::size_t len = count - 1;
  for (std::size_t i = 0; i < count; ++i) len += tokens[begin + i].size();
  std::string key;
  key.reserve(len);
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) key.push_back(' ');
    key += tokens[begin + i];
  }
  return key;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

NGramBag::NGramBag(int order) : order_(order) {
  if (order < 1) {
    throw ArgumentError("n-gram order must be >= 1, got " +
                        std::to_string(order));
  }
}

void NGramBag::add_document(const TokenSequence& tokens) {
  const std::size_t n = static_cast<std::size_t>(order_);
  if (tokens.size() < n) return;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts_[join_gram(tokens, i, n)];
    ++total_;
  }
}

void NGramBag::insert(const TokenSequence& gram, std::uint64_t count) {
  if (gram.size() != static_cast<std::size_t>(order_)) {
    throw ArgumentError("gram has " + std::to_string(gram.size()) +
                        " tokens, bag order is " + std::to_string(order_));
  }
  if (count == 0) throw ArgumentError("gram multiplicity must be >= 1");
  counts_[join_gram(gram, 0, gram.size())] += count;
  total_ += count;
}

void NGramBag::merge(const NGramBag& other) {
  if (other.order_ != order_) {
    throw ArgumentError("cannot merge bags of order " +
                        std::to_string(other.order_) + " and " +
                        std::to_string(order_));
  }
  for (const auto& [gram, count] : other.counts_) counts_[gram] += count;
  total_ += other.total_;
}

NGramBag extract_ngrams(const TokenSequence& tokens, int order) {
  NGramBag bag(order);
  bag.add_document(tokens);
  return bag;
}

double unique_rate(const NGramBag& bag) {
  if (bag.empty()) {
    throw DegenerateInputError(
        "unique n-gram rate is undefined on an empty bag");
  }
  return static_cast<double>(bag.unique()) / static_cast<double>(bag.total());
}

NGramBag prompt_ngram_bag(std::span<const PreferenceSample> samples, int order,
                          const Tokenizer& tokenizer) {
  NGramBag bag(order);
  for (const PreferenceSample& sample : samples) {
    TokenSequence tokens =
        tokenizer ? tokenizer(sample.prompt) : tokenize(sample.prompt);
    bag.add_document(tokens);
  }
  return bag;
}

namespace {

using nlohmann::json;

PreferenceSample parse_sample(const json& j, const std::filesystem::path& path,
                              std::size_t lineno) {
  auto where = [&](const std::string& id) {
    return "sample " + id + " (" + path.string() + ":" +
           std::to_string(lineno) + ")";
  };
  if (!j.is_object()) {
    throw ValidationError(where("line-" + std::to_string(lineno)) +
                          ": line is not a JSON object");
  }

  PreferenceSample sample;
  if (j.contains("id")) {
    if (!j["id"].is_string()) {
      throw ValidationError(where("line-" + std::to_string(lineno)) +
                            ": \"id\" must be a string");
    }
    sample.id = j["id"].get<std::string>();
  } else {
    sample.id = "line-" + std::to_string(lineno);
  }

  if (!j.contains("prompt") || !j["prompt"].is_string()) {
    throw ValidationError(where(sample.id) +
                          ": missing or non-string \"prompt\"");
  }
  sample.prompt = j["prompt"].get<std::string>();

  if (!j.contains("responses") || !j["responses"].is_array() ||
      j["responses"].empty()) {
    throw ValidationError(where(sample.id) +
                          ": \"responses\" must be a non-empty array");
  }
  for (const auto& r : j["responses"]) {
    if (!r.is_string()) {
      throw ValidationError(where(sample.id) +
                            ": \"responses\" entries must be strings");
    }
    sample.responses.push_back(r.get<std::string>());
  }

  if (j.contains("rewards")) {
    if (!j["rewards"].is_array()) {
      throw ValidationError(where(sample.id) +
                            ": \"rewards\" must be an array");
    }
    std::vector<double> rewards;
    for (const auto& r : j["rewards"]) {
      if (!r.is_number()) {
        throw ValidationError(where(sample.id) +
                              ": \"rewards\" entries must be numbers");
      }
      rewards.push_back(r.get<double>());
    }
    if (rewards.size() != sample.responses.size()) {
      throw ValidationError(
          where(sample.id) + ": rewards length " +
          std::to_string(rewards.size()) + " does not match responses length " +
          std::to_string(sample.responses.size()));
    }
    sample.rewards = std::move(rewards);
  }
  return sample;
}

bool is_blank(const std::string& line) {
  for (unsigned char c : line) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace

std::vector<PreferenceSample> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::vector<PreferenceSample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      throw ParseError("malformed JSON at " + path.string() + ":" +
                           std::to_string(lineno),
                       lineno);
    }
    samples.push_back(parse_sample(j, path, lineno));
  }
  return samples;
}

void save_jsonl(const std::filesystem::path& path,
                std::span<const PreferenceSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const PreferenceSample& sample : samples) {
    json j;
    j["id"] = sample.id;
    j["prompt"] = sample.prompt;
    j["responses"] = sample.responses;
    if (sample.rewards) j["rewards"] = *sample.rewards;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace divkit
