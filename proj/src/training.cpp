#include "contpat/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "contpat/autodiff/ops.hpp"
#include "contpat/metrics.hpp"

namespace contpat {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (pattern_batch == 0) throw ConfigError("pattern_batch must be positive");
  if (accumulation == 0) throw ConfigError("accumulation must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be non-negative");
  }
  if (!(head_dropout >= 0.0 && head_dropout < 1.0)) {
    throw ConfigError("head_dropout must lie in [0, 1)");
  }
}

void TrainConfig::validate(std::size_t train_size, std::size_t n_patterns) const {
  validate();
  if (train_size == 0) throw ConfigError("training set is empty");
  if (pattern_batch > n_patterns) {
    throw ConfigError("pattern_batch " + std::to_string(pattern_batch) + " exceeds the " +
                      std::to_string(n_patterns) + " patterns of the model");
  }
  if (batch_size > train_size) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds training set size " +
                      std::to_string(train_size));
  }
}

TrainConfig train_preset(std::string_view name) {
  TrainConfig c;
  if (name == "toy") return c;
  c.epochs = 5;
  c.pattern_batch = 5;
  c.head_dropout = 0.1;
  if (name == "base-sherliic") {
    c.learning_rate = 2.28e-5;
    c.weight_decay = 6.52e-2;
    c.accumulation = 2;
    c.batch_size = 10;
  } else if (name == "large-sherliic") {
    c.learning_rate = 1.29e-5;
    c.weight_decay = 2.49e-4;
    c.accumulation = 3;
    c.batch_size = 2;
  } else if (name == "base-levyholt") {
    c.learning_rate = 2.72e-5;
    c.weight_decay = 1.43e-3;
    c.accumulation = 1;
    c.batch_size = 10;
  } else if (name == "large-levyholt") {
    c.learning_rate = 4.55e-6;
    c.weight_decay = 3.90e-4;
    c.accumulation = 2;
    c.batch_size = 2;
  } else {
    throw ConfigError("unknown training preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> train_preset_names() {
  return {"toy", "base-sherliic", "large-sherliic", "base-levyholt", "large-levyholt"};
}

void adam_step(std::span<ad::Tensor* const> params, AdamState& state, double lr,
               double weight_decay) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ParameterError("optimizer state holds " + std::to_string(state.m.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor& p = *params[i];
    auto w = p.values();
    // A tensor without a gradient buffer still takes the decay step.
    const std::span<const double> g = std::as_const(p).grad();
    const bool has_grad = p.has_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has_grad ? g[j] : 0.0;
      w[j] -= lr * weight_decay * w[j];
      m[j] = AdamState::kBeta1 * m[j] + (1.0 - AdamState::kBeta1) * gj;
      v[j] = AdamState::kBeta2 * v[j] + (1.0 - AdamState::kBeta2) * gj * gj;
      const double mh = m[j] / c1;
      const double vh = v[j] / c2;
      w[j] -= lr * mh / (std::sqrt(vh) + AdamState::kEps);
    }
  }
}

ad::Var batch_loss(ad::Graph& graph, Model& model, std::span<const Example> examples,
                   std::span<const PatternSpec> patterns, bool training, double head_dropout,
                   Rng& rng) {
  if (examples.empty() || patterns.empty()) {
    throw ConfigError("batch_loss needs at least one example and one pattern");
  }
  std::vector<std::vector<TokenId>> inputs;
  std::vector<int> labels;
  inputs.reserve(examples.size() * patterns.size());
  for (const auto& ex : examples) {
    for (const auto& spec : patterns) {
      inputs.push_back(pattern_input(model, spec, ex));
      labels.push_back(ex.label);
    }
  }
  auto logits = batch_logits(graph, model, inputs, training, head_dropout, rng);
  return ad::nll_from_logits(logits, labels);
}

double accuracy_at_zero(const Model& model, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  const auto scores = score_values(model, examples);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hit += decide(scores[i], 0.0) == examples[i].label ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(examples.size());
}

TrainHistory train(Model& model, std::span<const Example> train_set,
                   std::span<const Example> dev_set, const TrainConfig& config,
                   const TrainOptions& options) {
  config.validate(train_set.size(), model.patterns.size());
  Rng order_rng(derive_seed(config.seed, 0x0de5));
  Rng pattern_rng(derive_seed(config.seed, 0x9a77));
  Rng dropout_rng(derive_seed(config.seed, 0xd509));

  auto params = model.parameters();
  for (auto* p : params) p->clear_grad();
  AdamState adam;
  TrainHistory history;

  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> pattern_order(model.patterns.size());
  std::vector<Example> batch;
  std::vector<PatternSpec> chunk;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng);
    std::iota(pattern_order.begin(), pattern_order.end(), 0);
    std::shuffle(pattern_order.begin(), pattern_order.end(), pattern_rng);

    std::size_t pending = 0;
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    const auto flush = [&] {
      adam_step(params, adam, config.learning_rate, config.weight_decay);
      for (auto* p : params) p->zero_grad();
      pending = 0;
    };

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      for (std::size_t ps = 0; ps < pattern_order.size(); ps += config.pattern_batch) {
        const std::size_t pe = std::min(pattern_order.size(), ps + config.pattern_batch);
        chunk.clear();
        for (std::size_t j = ps; j < pe; ++j) chunk.push_back(model.patterns[pattern_order[j]]);

        if (options.on_batch) options.on_batch(batch, chunk);
        ad::Graph g;
        auto loss = batch_loss(g, model, batch, chunk, true, config.head_dropout, dropout_rng);
        const double value = loss.value().item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", step " << history.step_losses.size() + 1
              << " (learning rate " << config.learning_rate << ")";
          throw TrainingError(msg.str());
        }
        history.step_losses.push_back(value);
        epoch_loss += value;
        ++epoch_steps;
        if (config.accumulation > 1) loss = ad::scale(loss, 1.0 / static_cast<double>(config.accumulation));
        g.backward(loss);
        if (++pending == config.accumulation) flush();
      }
    }
    if (pending > 0) flush();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = history.step_losses.size();
    rec.mean_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    if (options.evaluate_dev && !dev_set.empty()) {
      const auto scores = score_values(model, dev_set);
      std::vector<int> labels;
      for (const auto& ex : dev_set) labels.push_back(ex.label);
      const bool has_positive = std::find(labels.begin(), labels.end(), 1) != labels.end();
      rec.dev_auc = has_positive ? auc_p50(pr_curve(scores, labels)) : 0.0;
    }
    if (options.evaluate_train_accuracy) rec.train_accuracy = accuracy_at_zero(model, train_set);
    history.epochs.push_back(rec);
    if (options.on_epoch && !options.on_epoch(rec, model)) break;
  }
  for (auto* p : params) p->clear_grad();
  return history;
}

}  // namespace contpat
