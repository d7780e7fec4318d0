#include "divkit/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "divkit/corpus.hpp"
#include "divkit/curation.hpp"
#include "divkit/diversity.hpp"
#include "divkit/errors.hpp"
#include "divkit/losses.hpp"
#include "divkit/scorer.hpp"

namespace divkit::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Shortest decimal text that round-trips the double. Used for CSV cells;
/// JSON output gets the same treatment from the serializer.
std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, end);
}

std::string digest_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for digesting");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char byte : bytes) {
    h ^= byte;
    h *= 0x100000001b3ull;
  }
  char hex[17];
  for (int i = 15; i >= 0; --i) {
    hex[i] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  hex[16] = '\0';
  return std::string("fnv1a64:") + hex;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed while writing " + path.string());
}

json diversity_json(const DiversityScore& score) {
  return {{"r_unique", score.unique_rate},
          {"m", score.prompt_count},
          {"p", score.decay},
          {"d", score.value}};
}

/// Accumulates the run record and writes it as <output-dir>/manifest.json.
/// Output paths are stored relative to the output directory, and the
/// manifest lists itself, so a directory scan finds no unreferenced files.
struct RunRecord {
  std::string command;
  json config = json::object();
  json input_digests = json::object();
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;

  void add_input(const std::string& key, const fs::path& file) {
    input_digests[key] = digest_file(file);
  }

  void write(const fs::path& output_dir) {
    outputs.push_back("manifest.json");
    std::sort(outputs.begin(), outputs.end());
    json manifest = {{"command", command},
                     {"config", config},
                     {"input_digests", input_digests},
                     {"outputs", outputs},
                     {"seed", seed}};
    write_file(output_dir / "manifest.json", manifest.dump(2) + "\n");
  }
};

fs::path prepare_output_dir(const std::string& dir) {
  fs::path out(dir);
  fs::create_directories(out);
  return out;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOpts {
  std::string input;
  std::string output_dir;
  int ngram = 2;
  double decay = 0.5;
};

int run_analyze(const AnalyzeOpts& o) {
  auto samples = load_jsonl(o.input);
  auto bag = prompt_ngram_bag(samples, o.ngram);
  auto score = diversity_score(bag, samples.size(), o.decay);

  fs::path out = prepare_output_dir(o.output_dir);
  json analysis = {{"ngram", o.ngram}, {"diversity", diversity_json(score)}};
  write_file(out / "analysis.json", analysis.dump(2) + "\n");
  std::string csv = "m,r_unique,d\n";
  csv += std::to_string(score.prompt_count) + "," + format_double(score.unique_rate) + "," +
         format_double(score.value) + "\n";
  write_file(out / "analysis.csv", csv);

  RunRecord record;
  record.command = "analyze";
  record.config = {{"decay", o.decay},
                   {"input", o.input},
                   {"ngram", o.ngram},
                   {"output_dir", o.output_dir}};
  record.add_input(o.input, o.input);
  record.outputs = {"analysis.json", "analysis.csv"};
  record.write(out);
  return 0;
}

// -------------------------------------------------------------- fit-decay

struct FitDecayOpts {
  std::string runs;
  std::string output_dir;
  int ngram = 2;
  double step = 0.05;
  double p_max = 1.0;
};

struct RunEntry {
  std::string corpus_ref;
  double score;
};

/// Runs file: JSONL of {"corpus": path, "score": number}. Relative corpus
/// paths resolve against the runs file's directory.
std::vector<RunEntry> parse_runs_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<RunEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ParseError("malformed JSON at " + path.string() + ":" + std::to_string(lineno), lineno);
    }
    if (!j.contains("corpus") || !j["corpus"].is_string() || !j.contains("score") ||
        !j["score"].is_number()) {
      throw ValidationError("run entry at " + path.string() + ":" + std::to_string(lineno) +
                            " needs a \"corpus\" path and a numeric \"score\"");
    }
    entries.push_back({j["corpus"].get<std::string>(), j["score"].get<double>()});
  }
  return entries;
}

int run_fit_decay(const FitDecayOpts& o) {
  fs::path runs_path(o.runs);
  auto entries = parse_runs_file(runs_path);
  if (entries.empty()) throw ValidationError("runs file " + o.runs + " has no entries");

  struct Row {
    CorpusMeasure measure;
    double score;
    std::string ref;
    fs::path resolved;
  };
  std::vector<Row> rows;
  rows.reserve(entries.size());
  fs::path base = runs_path.parent_path();
  for (const auto& entry : entries) {
    fs::path corpus_path(entry.corpus_ref);
    if (corpus_path.is_relative()) corpus_path = base / corpus_path;
    auto samples = load_jsonl(corpus_path);
    auto bag = prompt_ngram_bag(samples, o.ngram);
    rows.push_back({{std::move(bag), samples.size()}, entry.score, entry.corpus_ref, corpus_path});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.measure.prompt_count < b.measure.prompt_count;
  });

  std::vector<CorpusMeasure> measures;
  std::vector<double> scores;
  measures.reserve(rows.size());
  scores.reserve(rows.size());
  for (auto& row : rows) {
    measures.push_back(std::move(row.measure));
    scores.push_back(row.score);
  }

  GridSearchConfig config;
  config.step = o.step;
  config.p_max = o.p_max;
  auto search = search_decay_index(measures, scores, config);

  std::vector<FitPoint> points;
  points.reserve(measures.size());
  std::string csv = "m,r_unique,d,score\n";
  for (std::size_t i = 0; i < measures.size(); ++i) {
    auto score = diversity_score(measures[i].bag, measures[i].prompt_count, search.decay);
    points.push_back({.diversity = score.value, .score = scores[i]});
    csv += std::to_string(score.prompt_count) + "," + format_double(score.unique_rate) + "," +
           format_double(score.value) + "," + format_double(scores[i]) + "\n";
  }
  auto fit = linear_fit(points);

  json grid = json::array();
  for (const auto& point : search.grid) {
    grid.push_back({{"p", point.decay},
                    {"mse", point.mse ? json(*point.mse) : json(nullptr)},
                    {"ascending", point.ascending}});
  }
  json fit_json = {{"alpha", fit.slope},
                   {"beta", fit.intercept},
                   {"mse", search.mse},
                   {"p", search.decay},
                   {"grid", grid}};

  fs::path out = prepare_output_dir(o.output_dir);
  write_file(out / "fit.json", fit_json.dump(2) + "\n");
  write_file(out / "fit_points.csv", csv);

  RunRecord record;
  record.command = "fit-decay";
  record.config = {{"ngram", o.ngram},
                   {"output_dir", o.output_dir},
                   {"p_max", o.p_max},
                   {"runs", o.runs},
                   {"step", o.step}};
  record.add_input(o.runs, runs_path);
  for (const auto& row : rows) record.add_input(row.ref, row.resolved);
  record.outputs = {"fit.json", "fit_points.csv"};
  record.write(out);
  return 0;
}

// ----------------------------------------------------------------- subset

struct SubsetOpts {
  std::string input;
  std::string output_dir;
  std::uint64_t budget = 0;
  std::vector<int> lengths{2, 3, 4};
  std::uint64_t seed = 0;
  bool cross = false;
  int ngram = 2;
  double decay = 0.5;
};

int run_subset(const SubsetOpts& o) {
  auto samples = load_jsonl(o.input);
  auto plan = plan_budget(o.budget, o.lengths);

  std::vector<SubsetKey> cells;
  if (o.cross) {
    for (const auto& row : plan.allocations)
      for (const auto& col : plan.allocations)
        cells.push_back({.size = row.size, .ranking_length = col.ranking_length});
  } else {
    for (const auto& alloc : plan.allocations)
      cells.push_back({.size = alloc.size, .ranking_length = alloc.ranking_length});
  }
  auto subsets = build_nested_subsets(samples, cells, o.seed);

  fs::path out = prepare_output_dir(o.output_dir);
  RunRecord record;
  record.command = "subset";
  record.seed = o.seed;
  std::vector<int> lengths_sorted;
  for (const auto& alloc : plan.allocations) lengths_sorted.push_back(alloc.ranking_length);
  record.config = {{"budget", o.budget},  {"cross", o.cross}, {"decay", o.decay},
                   {"input", o.input},    {"lengths", lengths_sorted},
                   {"ngram", o.ngram},    {"output_dir", o.output_dir},
                   {"seed", o.seed}};
  record.add_input(o.input, o.input);

  for (const auto& [key, subset] : subsets) {
    std::string stem =
        "subset_m" + std::to_string(key.size) + "_k" + std::to_string(key.ranking_length);
    save_jsonl(out / (stem + ".jsonl"), subset);

    auto bag = prompt_ngram_bag(subset, o.ngram);
    auto score = diversity_score(bag, subset.size(), o.decay);
    json ids = json::array();
    for (const auto& sample : subset) ids.push_back(sample.id);
    json cell_manifest = {
        {"spec",
         {{"size", key.size}, {"ranking_length", key.ranking_length}, {"seed", o.seed}}},
        {"ids", ids},
        {"diversity", diversity_json(score)}};
    write_file(out / (stem + ".manifest.json"), cell_manifest.dump(2) + "\n");

    record.outputs.push_back(stem + ".jsonl");
    record.outputs.push_back(stem + ".manifest.json");
  }
  record.write(out);
  return 0;
}

// ----------------------------------------------------------------- rerank

struct RerankOpts {
  std::string input;
  std::string output_dir;
  std::string scorer = "mock";
  std::string scorer_url;
};

int run_rerank(const RerankOpts& o) {
  auto samples = load_jsonl(o.input);

  std::unique_ptr<Scorer> scorer;
  if (o.scorer == "remote") {
    if (o.scorer_url.empty())
      throw ArgumentError("remote scorer needs --scorer-url or DIVKIT_SCORER_URL");
    scorer = std::make_unique<RemoteScorer>(o.scorer_url);
  } else {
    scorer = std::make_unique<MockScorer>();
  }

  std::vector<PreferenceSample> ranked;
  ranked.reserve(samples.size());
  for (const auto& sample : samples) ranked.push_back(rerank_sample(sample, *scorer));

  fs::path out = prepare_output_dir(o.output_dir);
  save_jsonl(out / "reranked.jsonl", ranked);

  RunRecord record;
  record.command = "rerank";
  record.config = {{"input", o.input},
                   {"output_dir", o.output_dir},
                   {"scorer", o.scorer},
                   {"scorer_url", o.scorer_url}};
  record.add_input(o.input, o.input);
  record.outputs = {"reranked.jsonl"};
  record.write(out);
  return 0;
}

// ---------------------------------------------------------------- augment

struct AugmentOpts {
  std::string seed_set;
  std::string pool;
  std::string output_dir;
  int n_support = 2;
  int batch = 8;
  std::uint64_t count = 0;
  int ngram = 2;
  double decay = 0.5;
  std::uint64_t seed = 0;
};

int run_augment(const AugmentOpts& o) {
  auto seed_samples = load_jsonl(o.seed_set);
  auto pool_samples = load_jsonl(o.pool);

  AugmentationConfig config;
  config.n_support = o.n_support;
  config.batch_size = o.batch;
  config.count = o.count;
  config.ngram_order = o.ngram;
  config.seed = o.seed;
  auto result = augment_dataset(seed_samples, pool_samples, config);

  auto before_bag = prompt_ngram_bag(seed_samples, o.ngram);
  auto before = diversity_score(before_bag, seed_samples.size(), o.decay);
  auto after_bag = prompt_ngram_bag(result.dataset, o.ngram);
  auto after = diversity_score(after_bag, result.dataset.size(), o.decay);

  fs::path out = prepare_output_dir(o.output_dir);
  save_jsonl(out / "augmented.jsonl", result.dataset);

  json ids = json::array();
  for (const auto& sample : result.dataset) ids.push_back(sample.id);
  json set_manifest = {{"spec",
                        {{"batch_size", o.batch},
                         {"count", o.count},
                         {"n_support", o.n_support},
                         {"ngram_order", o.ngram},
                         {"seed", o.seed}}},
                       {"ids", ids},
                       {"diversity", diversity_json(after)}};
  write_file(out / "augmented.manifest.json", set_manifest.dump(2) + "\n");

  json report = {{"before", diversity_json(before)},
                 {"after", diversity_json(after)},
                 {"added", result.dataset.size() - seed_samples.size()}};
  write_file(out / "report.json", report.dump(2) + "\n");

  RunRecord record;
  record.command = "augment";
  record.seed = o.seed;
  record.config = {{"batch", o.batch},   {"count", o.count}, {"decay", o.decay},
                   {"n_support", o.n_support}, {"ngram", o.ngram},
                   {"output_dir", o.output_dir}, {"pool", o.pool},
                   {"seed", o.seed},     {"seed_set", o.seed_set}};
  record.add_input(o.seed_set, o.seed_set);
  record.add_input(o.pool, o.pool);
  record.outputs = {"augmented.jsonl", "augmented.manifest.json", "report.json"};
  record.write(out);
  return 0;
}

// ------------------------------------------------------------- loss-check

struct LossCheckOpts {
  std::string input;
  std::string output_dir;
  double fd_step = 1e-5;
  double tolerance = 1e-4;
};

std::vector<double> number_array(const json& object, const char* key, std::size_t index) {
  if (!object.contains(key) || !object[key].is_array()) {
    throw ValidationError("loss-check instance " + std::to_string(index) + " needs a \"" + key +
                          "\" array");
  }
  std::vector<double> values;
  values.reserve(object[key].size());
  for (const auto& element : object[key]) {
    if (!element.is_number()) {
      throw ValidationError("loss-check instance " + std::to_string(index) + ": \"" + key +
                            "\" holds a non-numeric entry");
    }
    values.push_back(element.get<double>());
  }
  return values;
}

int run_loss_check(const LossCheckOpts& o) {
  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw IoError("cannot open " + o.input);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json instances = json::parse(text, nullptr, false);
  if (instances.is_discarded() || !instances.is_array()) {
    throw ParseError("loss-check input " + o.input + " must be a JSON array of instances", 0);
  }

  json reports = json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const json& instance = instances[i];
    if (!instance.is_object()) {
      throw ValidationError("loss-check instance " + std::to_string(i) + " is not an object");
    }
    RankingLogProbs logprobs{.candidate_logprobs = number_array(instance, "candidate_logprobs", i),
                             .top_token_logprobs = number_array(instance, "top_token_logprobs", i)};
    std::vector<double> rewards = number_array(instance, "rewards", i);
    if (!instance.contains("beta") || !instance["beta"].is_number()) {
      throw ValidationError("loss-check instance " + std::to_string(i) +
                            " needs a numeric \"beta\"");
    }
    double beta = instance["beta"].get<double>();

    try {
      auto temperatures = pro_temperatures(rewards);
      auto breakdown = pro_loss_with_gradients(logprobs, temperatures, beta);
      auto fd = finite_difference_check(logprobs, temperatures, beta, o.fd_step);
      bool passed = fd.max_relative_error <= o.tolerance;
      if (!passed) ++failed;
      reports.push_back({{"loss", breakdown.total},
                         {"sft_loss", breakdown.sft},
                         {"ranking_loss", breakdown.ranking},
                         {"candidate_gradient", breakdown.candidate_gradient},
                         {"token_gradient", breakdown.token_gradient},
                         {"candidate_fd", fd.candidate_fd},
                         {"token_fd", fd.token_fd},
                         {"max_relative_error", fd.max_relative_error},
                         {"passed", passed}});
    } catch (const Error& e) {
      throw ValidationError("loss-check instance " + std::to_string(i) + ": " + e.what());
    }
  }

  json result = {{"instances", reports}, {"all_passed", failed == 0}};
  fs::path out = prepare_output_dir(o.output_dir);
  write_file(out / "loss_check.json", result.dump(2) + "\n");

  RunRecord record;
  record.command = "loss-check";
  record.config = {{"fd_step", o.fd_step},
                   {"input", o.input},
                   {"output_dir", o.output_dir},
                   {"tolerance", o.tolerance}};
  record.add_input(o.input, o.input);
  record.outputs = {"loss_check.json"};
  record.write(out);

  if (failed > 0) {
    std::cerr << "divkit: error: gradient check failed for " << failed << " of "
              << instances.size() << " instances\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Diversity-aware curation toolkit for preference datasets"};
  app.name("divkit");
  app.require_subcommand(1);

  AnalyzeOpts analyze_opts;
  auto* analyze = app.add_subcommand("analyze", "Measure prompt diversity of a JSONL corpus");
  analyze->add_option("--input", analyze_opts.input, "JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--ngram", analyze_opts.ngram, "gram order")->capture_default_str();
  analyze->add_option("--decay", analyze_opts.decay, "decay index p")->capture_default_str();
  analyze->add_option("--output-dir", analyze_opts.output_dir, "where outputs go")->required();

  FitDecayOpts fit_opts;
  auto* fit_decay =
      app.add_subcommand("fit-decay", "Grid-search the decay index against observed scores");
  fit_decay
      ->add_option("--runs", fit_opts.runs,
                   "JSONL of {\"corpus\": path, \"score\": number}; relative paths resolve "
                   "against the runs file")
      ->required()
      ->check(CLI::ExistingFile);
  fit_decay->add_option("--ngram", fit_opts.ngram, "gram order")->capture_default_str();
  fit_decay->add_option("--step", fit_opts.step, "grid step")->capture_default_str();
  fit_decay->add_option("--p-max", fit_opts.p_max, "largest decay index tried")
      ->capture_default_str();
  fit_decay->add_option("--output-dir", fit_opts.output_dir, "where outputs go")->required();

  SubsetOpts subset_opts;
  auto* subset =
      app.add_subcommand("subset", "Plan an annotation budget and draw nested subsets");
  subset->add_option("--input", subset_opts.input, "JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);
  subset->add_option("--budget", subset_opts.budget, "total annotations to spend")->required();
  subset->add_option("--lengths", subset_opts.lengths, "ranking lengths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  subset->add_option("--seed", subset_opts.seed, "sampling seed")->capture_default_str();
  subset->add_flag("--cross", subset_opts.cross,
                   "emit every size x length cell instead of one subset per budget row");
  subset->add_option("--ngram", subset_opts.ngram, "gram order for subset diversity")
      ->capture_default_str();
  subset->add_option("--decay", subset_opts.decay, "decay index for subset diversity")
      ->capture_default_str();
  subset->add_option("--output-dir", subset_opts.output_dir, "where outputs go")->required();

  RerankOpts rerank_opts;
  auto* rerank = app.add_subcommand("rerank", "Re-order responses by reward score");
  rerank->add_option("--input", rerank_opts.input, "JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);
  rerank->add_option("--scorer", rerank_opts.scorer, "which scorer to use")
      ->check(CLI::IsMember({"mock", "remote"}))
      ->capture_default_str();
  rerank->add_option("--scorer-url", rerank_opts.scorer_url, "remote scorer endpoint")
      ->envname("DIVKIT_SCORER_URL");
  rerank->add_option("--output-dir", rerank_opts.output_dir, "where outputs go")->required();

  AugmentOpts augment_opts;
  auto* augment =
      app.add_subcommand("augment", "Grow a dataset from a pool, preferring novel prompts");
  augment->add_option("--seed-set", augment_opts.seed_set, "JSONL dataset to grow")
      ->required()
      ->check(CLI::ExistingFile);
  augment->add_option("--pool", augment_opts.pool, "JSONL candidate pool")
      ->required()
      ->check(CLI::ExistingFile);
  augment->add_option("--n-support", augment_opts.n_support, "prompts merged per step")
      ->capture_default_str();
  augment->add_option("--batch", augment_opts.batch, "candidates drawn per step")
      ->capture_default_str();
  augment->add_option("--count", augment_opts.count, "prompts to add")->required();
  augment->add_option("--ngram", augment_opts.ngram, "gram order")->capture_default_str();
  augment->add_option("--decay", augment_opts.decay, "decay index for the report")
      ->capture_default_str();
  augment->add_option("--seed", augment_opts.seed, "selection seed")->capture_default_str();
  augment->add_option("--output-dir", augment_opts.output_dir, "where outputs go")->required();

  LossCheckOpts loss_opts;
  auto* loss_check =
      app.add_subcommand("loss-check", "Evaluate ranking losses and verify gradients");
  loss_check->add_option("--input", loss_opts.input, "JSON array of loss instances")
      ->required()
      ->check(CLI::ExistingFile);
  loss_check->add_option("--fd-step", loss_opts.fd_step, "finite-difference step")
      ->capture_default_str();
  loss_check->add_option("--tolerance", loss_opts.tolerance, "max relative gradient error")
      ->capture_default_str();
  loss_check->add_option("--output-dir", loss_opts.output_dir, "where outputs go")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "divkit: error: " << e.what() << '\n';
    int code = e.get_exit_code();
    return code == 0 ? 2 : code;
  }

  try {
    if (analyze->parsed()) return run_analyze(analyze_opts);
    if (fit_decay->parsed()) return run_fit_decay(fit_opts);
    if (subset->parsed()) return run_subset(subset_opts);
    if (rerank->parsed()) return run_rerank(rerank_opts);
    if (augment->parsed()) return run_augment(augment_opts);
    if (loss_check->parsed()) return run_loss_check(loss_opts);
  } catch (const std::exception& e) {
    std::cerr << "divkit: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? static_cast<std::size_t>(argc) - 1 : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace divkit::cli
