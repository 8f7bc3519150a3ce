#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "contpat/checkpoint.hpp"
#include "contpat/data.hpp"
#include "contpat/metrics.hpp"
#include "contpat/run_config.hpp"
#include "contpat/synth.hpp"
#include "contpat/tokenizer.hpp"
#include "contpat/training.hpp"

namespace contpat {

// Tokenized splits plus the tokenizer built from them.
struct PreparedData {
  Tokenizer tokenizer;
  DatasetSplit train;
  DatasetSplit dev;
  std::optional<DatasetSplit> test;
};

// Builds the tokenizer from train and dev text (and any discrete pattern
// texts) and tokenizes every split.
PreparedData prepare_data(const RunConfig& config, DatasetSplit train, DatasetSplit dev,
                          std::optional<DatasetSplit> test = std::nullopt);
PreparedData load_data(const RunConfig& config);

// Pattern set for a config; `vocab_size` receives the extended vocabulary size.
std::vector<PatternSpec> make_patterns(const RunConfig& config, const Tokenizer& tokenizer,
                                       std::size_t& vocab_size);

struct TrainedRun {
  Checkpoint checkpoint;
  TrainHistory history;
  EvalReport dev_report;  // at the tuned threshold
  double theta = 0.0;
};

// Trains in memory and tunes the threshold on dev; writes nothing.
TrainedRun run_training(const RunConfig& config, const PreparedData& data,
                        const TrainOptions& options = {});

struct TrainOutput {
  std::filesystem::path run_dir;
  std::string checkpoint_hash;
  TrainedRun run;
};

// Validates, trains, and writes checkpoint.bin, history.jsonl,
// dev_report.json, dev_curve.csv, theta.txt and config.json into
// <output_dir>/<run_id>. Nothing is written if any step fails.
TrainOutput cmd_train(const RunConfig& config);

struct ParameterSummary {
  std::size_t total = 0;
  std::size_t added = 0;  // continuous pattern embeddings, n * k * d
  std::size_t base = 0;   // total - added
  double added_fraction = 0.0;  // added / base
};

ParameterSummary parameter_summary(std::size_t n, std::size_t k, std::size_t d,
                                   std::size_t base_parameters);
ParameterSummary parameter_summary(const Model& model);

struct ThetaSource {
  enum class Kind { dev, zero, value };
  Kind kind = Kind::dev;
  double value = 0.0;

  // "dev", "zero", or a number.
  static ThetaSource parse(const std::string& text);
};

struct EvalOutput {
  EvalReport report;
  ParameterSummary parameters;
  std::vector<double> scores;
  DatasetSplit split;
};

// Tokenizes `split` with the checkpoint's tokenizer and scores it.
EvalOutput evaluate_checkpoint(const Checkpoint& checkpoint, DatasetSplit split, double theta);
EvalOutput cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& test_tsv,
                    const ThetaSource& theta);
// Evaluation at threshold 0, the only choice when no target dev data exists.
EvalOutput cmd_transfer(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& target_tsv);

struct Neighbor {
  TokenId id = 0;
  std::string token;
  double cosine = 0.0;
};

struct TokenAnalysis {
  TokenId id = 0;
  std::size_t pattern = 0;
  std::size_t position = 0;
  std::vector<Neighbor> nearest;  // most similar word-vocabulary tokens
  double max_vocab_cosine = 0.0;
  double max_pattern_cosine = 0.0;  // against other pattern tokens, self excluded
};

struct EmbeddingAnalysis {
  std::vector<TokenAnalysis> tokens;
  double max_vocab_cosine = 0.0;
  double max_pattern_cosine = 0.0;  // 0 when there is a single pattern token
};

// Cosine of two vectors; 0 if either has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

EmbeddingAnalysis analyze_embeddings(const Checkpoint& checkpoint, std::size_t top = 5);

struct SweepSpec {
  std::vector<std::size_t> n_list;
  std::vector<std::size_t> k_list;
  std::vector<PatternFamily> families{PatternFamily::alpha, PatternFamily::beta};
  std::size_t jobs = 1;
};

struct SweepRow {
  PatternFamily family = PatternFamily::beta;
  std::size_t n = 0;
  std::size_t k = 0;
  std::optional<double> dev_auc_percent;
  bool shared = false;
  std::string error;
};

// One training run per distinct cell; alpha and beta share runs for k <= 2.
std::vector<SweepRow> run_sweep(const RunConfig& base, const PreparedData& data,
                                const SweepSpec& spec);
std::string sweep_csv(const std::vector<SweepRow>& rows);
// Writes <out_dir>/sweep.csv and one <out_dir>/sweep_errors/<cell>.txt per failed cell.
std::vector<SweepRow> cmd_sweep(const RunConfig& base, const SweepSpec& spec,
                                const std::filesystem::path& out_dir);

struct SynthRequest {
  std::uint64_t seed = 0;
  SynthOptions options;
  std::optional<std::filesystem::path> rules;  // default table when unset
  enum class Half { all, first, second } half = Half::all;
  std::uint64_t rule_seed = 0;  // partition draw for first/second
  double rule_fraction = 0.5;
};

SynthDataset synthesize(const SynthRequest& request);
// Writes train.tsv, dev.tsv and test.tsv.
void cmd_synth(const SynthRequest& request, const std::filesystem::path& out_dir);

std::string report_json(const EvalReport& report,
                        const std::optional<ParameterSummary>& parameters = std::nullopt);
std::string curve_csv(const EvalReport& report);
std::string history_jsonl(const TrainHistory& history);
std::string analysis_json(const EmbeddingAnalysis& analysis);
// "pair_id<TAB>score<TAB>label" lines, scores printed with 17 significant digits.
std::string score_file(std::span<const Example> examples, std::span<const double> scores);

}  // namespace contpat
