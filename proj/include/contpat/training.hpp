#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contpat/classifier.hpp"
#include "contpat/data.hpp"

namespace contpat {

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 10;
  std::size_t pattern_batch = 5;
  std::size_t accumulation = 1;  // "c": optimizer step every c mini-batches
  double learning_rate = 3e-4;
  double weight_decay = 0.0;
  double head_dropout = kHeadDropout;
  std::uint64_t seed = 0;

  // Throws ConfigError for out-of-range settings.
  void validate() const;
  // Adds checks against the training set size and pattern count.
  void validate(std::size_t train_size, std::size_t n_patterns) const;
};

// Named hyperparameter sets. "toy" suits the synthetic corpus; the others
// are the settings tuned for the two benchmark datasets.
TrainConfig train_preset(std::string_view name);
std::vector<std::string> train_preset_names();

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Decoupled weight decay followed by a bias-corrected Adam update. Reads
// gradients from the tensors; does not clear them.
void adam_step(std::span<ad::Tensor* const> params, AdamState& state, double lr,
               double weight_decay);

// Mean NLL over every (example, pattern) combination in the batch.
ad::Var batch_loss(ad::Graph& graph, Model& model, std::span<const Example> examples,
                   std::span<const PatternSpec> patterns, bool training, double head_dropout,
                   Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double dev_auc = 0.0;   // area above precision 0.5, absolute units
  double train_accuracy = 0.0;
  std::size_t steps = 0;  // loss computations completed so far
};

struct TrainHistory {
  std::vector<double> step_losses;  // one entry per mini-batch
  std::vector<EpochRecord> epochs;
};

// Called after each epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&, const Model&)>;

struct TrainOptions {
  bool evaluate_dev = true;
  bool evaluate_train_accuracy = false;
  EpochCallback on_epoch;
  // Observes each (examples, patterns) mini-batch before its loss is computed.
  std::function<void(std::span<const Example>, std::span<const PatternSpec>)> on_batch;
};

TrainHistory train(Model& model, std::span<const Example> train_set,
                   std::span<const Example> dev_set, const TrainConfig& config,
                   const TrainOptions& options = {});

// Fraction of examples where decide(s, 0) matches the label.
double accuracy_at_zero(const Model& model, std::span<const Example> examples);

}  // namespace contpat
