#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "contpat/autodiff/ops.hpp"
#include "contpat/experiments.hpp"
#include "contpat/training.hpp"
#include "contpat/vocab.hpp"

using namespace contpat;

namespace {

struct Fixture {
  PreparedData data;
  std::vector<Example> all;  // train + dev + test, tokenized
  RunConfig config;
};

Fixture toy(std::size_t size, std::size_t d_model, std::uint64_t seed) {
  Fixture f;
  f.config.seed = seed;
  f.config.train = train_preset("toy");
  f.config.train.seed = seed;
  f.config.encoder.d_model = d_model;
  f.config.encoder.d_ff = 4 * d_model;
  f.config.encoder.max_len = 48;
  f.config.pattern = {PatternFamily::beta, 5, 2, {}};
  SynthRequest req;
  req.seed = seed;
  req.options.size = size;
  auto ds = synthesize(req);
  f.data = prepare_data(f.config, std::move(ds.train), std::move(ds.dev), std::move(ds.test));
  for (const auto* s : {&f.data.train, &f.data.dev, &*f.data.test}) {
    f.all.insert(f.all.end(), s->examples.begin(), s->examples.end());
  }
  return f;
}

Model model_for(const Fixture& f, std::uint64_t seed, double internal_dropout = 0.1) {
  std::size_t vocab = 0;
  auto patterns = make_patterns(f.config, f.data.tokenizer, vocab);
  EncoderConfig ec = f.config.encoder;
  ec.vocab_size = vocab;
  ec.internal_dropout = internal_dropout;
  return make_model(ec, f.data.tokenizer.size(), std::move(patterns), seed);
}

std::vector<std::vector<double>> snapshot(const Model& m) {
  std::vector<std::vector<double>> out;
  m.visit([&](const std::string&, const ad::Tensor& t) { out.emplace_back(t.values().begin(), t.values().end()); });
  return out;
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_NO_THROW(c.validate(10, 5));
  EXPECT_THROW(c.validate(9, 5), ConfigError);   // batch larger than the data
  EXPECT_THROW(c.validate(10, 4), ConfigError);  // pattern_batch > n
  for (auto mutate : std::vector<void (*)(TrainConfig&)>{
           [](TrainConfig& t) { t.epochs = 0; }, [](TrainConfig& t) { t.batch_size = 0; },
           [](TrainConfig& t) { t.pattern_batch = 0; }, [](TrainConfig& t) { t.accumulation = 0; },
           [](TrainConfig& t) { t.learning_rate = 0; }, [](TrainConfig& t) { t.weight_decay = -1e-3; },
           [](TrainConfig& t) { t.head_dropout = 1.0; }}) {
    TrainConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), ConfigError);
  }
}

TEST(TrainPreset, Values) {
  const auto toy_preset = train_preset("toy");
  EXPECT_EQ(toy_preset.epochs, 5u);
  EXPECT_EQ(toy_preset.batch_size, 10u);
  EXPECT_EQ(toy_preset.pattern_batch, 5u);
  EXPECT_DOUBLE_EQ(toy_preset.learning_rate, 3e-4);
  EXPECT_DOUBLE_EQ(toy_preset.head_dropout, 0.1);

  struct Row {
    const char* name;
    double lr, wd;
    std::size_t c, batch;
  };
  for (const Row& r : {Row{"base-sherliic", 2.28e-5, 6.52e-2, 2, 10}, Row{"large-sherliic", 1.29e-5, 2.49e-4, 3, 2},
                       Row{"base-levyholt", 2.72e-5, 1.43e-3, 1, 10}, Row{"large-levyholt", 4.55e-6, 3.90e-4, 2, 2}}) {
    const auto p = train_preset(r.name);
    EXPECT_DOUBLE_EQ(p.learning_rate, r.lr) << r.name;
    EXPECT_DOUBLE_EQ(p.weight_decay, r.wd) << r.name;
    EXPECT_EQ(p.accumulation, r.c) << r.name;
    EXPECT_EQ(p.batch_size, r.batch) << r.name;
    EXPECT_EQ(p.epochs, 5u);
    EXPECT_EQ(p.pattern_batch, 5u);
  }
  EXPECT_EQ(train_preset_names().size(), 5u);
  EXPECT_THROW(train_preset("xl"), ConfigError);
}

TEST(Adam, FirstStepMovesByLr) {
  ad::Tensor p = ad::Tensor::scalar(1.0, true);
  p.grad()[0] = 1.0;
  ad::Tensor* params[] = {&p};
  AdamState st;
  adam_step(params, st, 0.1, 0.0);
  // eps keeps the step just short of lr
  EXPECT_NEAR(p.item(), 0.9, 1e-8);
  EXPECT_NEAR(p.item(), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, HandTraceTwoSteps) {
  ad::Tensor p = ad::Tensor::scalar(0.5, true);
  ad::Tensor* params[] = {&p};
  AdamState st;
  p.grad()[0] = 2.0;
  adam_step(params, st, 0.01, 0.0);
  p.grad()[0] = -1.0;
  adam_step(params, st, 0.01, 0.0);
  // m2 = 0.9*0.2 - 0.1 = 0.08, v2 = 0.999*0.004 + 0.001 = 0.004996
  const double mh = 0.08 / (1 - 0.81), vh = 0.004996 / (1 - 0.998001);
  const double expected = 0.5 - 0.01 * 2.0 / (2.0 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  EXPECT_NEAR(p.item(), expected, 1e-14);
}

TEST(Adam, ZeroGradient) {
  ad::Tensor a = ad::Tensor::vector({1.0, -2.0, 3.0}, true);
  a.zero_grad();
  ad::Tensor b = ad::Tensor::vector({4.0}, true);  // no gradient buffer at all
  ad::Tensor* params[] = {&a, &b};
  AdamState st;
  adam_step(params, st, 0.1, 0.0);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(a[1], -2.0);
  EXPECT_EQ(b[0], 4.0);

  AdamState decay;
  adam_step(params, decay, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(a[0], 1.0 * (1 - 0.05));
  EXPECT_DOUBLE_EQ(a[1], -2.0 * (1 - 0.05));
  EXPECT_DOUBLE_EQ(b[0], 4.0 * (1 - 0.05));
}

TEST(BatchLoss, Examples) {
  auto f = toy(60, 16, 1);
  auto m = model_for(f, 1);
  const auto& ex = f.data.train.examples;
  Rng rng(0);

  for (double& w : m.head.weight.values()) w = 0.0;
  for (double& b : m.head.bias.values()) b = 0.0;
  {
    ad::Graph g;
    EXPECT_NEAR(batch_loss(g, m, std::span(ex).first(4), m.patterns, true, 0.1, rng).value().item(),
                std::log(2.0), 1e-15);
  }

  // P(correct) = 0.8 via the bias alone.
  const int y = ex[0].label;
  m.head.bias[static_cast<std::size_t>(y)] = std::log(0.8);
  m.head.bias[static_cast<std::size_t>(1 - y)] = std::log(0.2);
  {
    ad::Graph g;
    EXPECT_NEAR(batch_loss(g, m, std::span(ex).first(1), std::span(m.patterns).first(1), true, 0.1, rng)
                    .value()
                    .item(),
                -std::log(0.8), 1e-12);
  }

  auto trained = model_for(f, 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      ad::Graph g;
      sum += batch_loss(g, trained, std::span(ex).subspan(i, 1), std::span(trained.patterns).subspan(j, 1), false,
                        0.1, rng)
                 .value()
                 .item();
    }
  }
  ad::Graph g;
  EXPECT_NEAR(batch_loss(g, trained, std::span(ex).first(2), std::span(trained.patterns).first(2), false, 0.1, rng)
                  .value()
                  .item(),
              sum / 4.0, 1e-12);
}

TEST(BatchLoss, OverflowNamesExample) {
  auto f = toy(60, 16, 1);
  auto m = model_for(f, 1);
  Example e = f.data.train.examples[0];
  e.pair_id = "train-99";
  e.premise_ids.assign(60, kUnk);
  Rng rng(0);
  ad::Graph g;
  try {
    batch_loss(g, m, std::span(&e, 1), m.patterns, false, 0.1, rng);
    FAIL() << "expected LengthError";
  } catch (const LengthError& err) {
    EXPECT_NE(std::string(err.what()).find("train-99"), std::string::npos);
  }
}

TEST(Train, AccumulationEquivalence) {
  auto f = toy(60, 16, 3);
  std::vector<Example> data(f.data.train.examples.begin(), f.data.train.examples.begin() + 40);
  TrainConfig big = f.config.train;
  big.epochs = 2;
  big.head_dropout = 0.0;
  big.batch_size = 10;
  big.accumulation = 1;
  TrainConfig small = big;
  small.batch_size = 5;
  small.accumulation = 2;

  auto a = model_for(f, 4, 0.0);
  auto b = model_for(f, 4, 0.0);
  TrainOptions opt;
  opt.evaluate_dev = false;
  train(a, data, {}, big, opt);
  train(b, data, {}, small, opt);
  const auto sa = snapshot(a), sb = snapshot(b);
  double worst = 0.0;
  for (std::size_t t = 0; t < sa.size(); ++t) {
    for (std::size_t i = 0; i < sa[t].size(); ++i) worst = std::max(worst, std::abs(sa[t][i] - sb[t][i]));
  }
  EXPECT_LE(worst, 1e-10);
  // and the run actually moved the parameters
  const auto init = snapshot(model_for(f, 4, 0.0));
  EXPECT_NE(init, sa);
}

TEST(Train, Deterministic) {
  auto f = toy(60, 16, 5);
  TrainConfig c = f.config.train;
  c.epochs = 2;
  auto a = model_for(f, 6), b = model_for(f, 6);
  const auto ha = train(a, f.data.train.examples, f.data.dev.examples, c);
  const auto hb = train(b, f.data.train.examples, f.data.dev.examples, c);
  ASSERT_EQ(ha.step_losses.size(), hb.step_losses.size());
  EXPECT_EQ(std::memcmp(ha.step_losses.data(), hb.step_losses.data(), ha.step_losses.size() * sizeof(double)), 0);
  EXPECT_EQ(snapshot(a), snapshot(b));
  for (std::size_t e = 0; e < ha.epochs.size(); ++e) EXPECT_EQ(ha.epochs[e].dev_auc, hb.epochs[e].dev_auc);
}

TEST(Train, EveryPairOncePerEpoch) {
  auto f = toy(60, 16, 7);
  TrainConfig c = f.config.train;
  c.epochs = 3;
  c.batch_size = 7;  // ragged last batch
  c.pattern_batch = 2;
  auto m = model_for(f, 7);
  std::map<std::pair<std::string, std::vector<TokenId>>, int> seen;
  std::size_t batches = 0;
  TrainOptions opt;
  opt.evaluate_dev = false;
  opt.on_batch = [&](std::span<const Example> ex, std::span<const PatternSpec> ps) {
    ++batches;
    EXPECT_LE(ex.size(), 7u);
    EXPECT_LE(ps.size(), 2u);
    for (const auto& e : ex) {
      for (const auto& p : ps) ++seen[{e.pair_id, p.tokens}];
    }
  };
  const auto& train_set = f.data.train.examples;
  train(m, train_set, {}, c, opt);
  EXPECT_EQ(seen.size(), train_set.size() * m.patterns.size());
  for (const auto& [key, count] : seen) EXPECT_EQ(count, 3) << key.first;
  const std::size_t per_epoch = ((train_set.size() + 6) / 7) * 3;
  EXPECT_EQ(batches, per_epoch * 3);
}

TEST(Train, UpdatesEveryParameter) {
  auto f = toy(60, 16, 8);
  TrainConfig c = f.config.train;
  c.epochs = 1;
  auto m = model_for(f, 8);
  const auto before = snapshot(m);
  TrainOptions opt;
  opt.evaluate_dev = false;
  train(m, f.data.train.examples, {}, c, opt);
  const auto after = snapshot(m);
  std::vector<std::string> names;
  m.visit([&](const std::string& name, const ad::Tensor&) { names.push_back(name); });
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t t = 0; t < before.size(); ++t) EXPECT_NE(before[t], after[t]) << names[t];
  for (auto* p : m.parameters()) {
    EXPECT_TRUE(p->requires_grad());
    EXPECT_FALSE(p->has_grad());
  }
  EXPECT_EQ(m.parameters().size(), names.size());
}

TEST(Train, NanGuard) {
  auto f = toy(60, 16, 9);
  auto m = model_for(f, 9);
  m.head.weight[0] = std::nan("");
  TrainOptions opt;
  opt.evaluate_dev = false;
  try {
    train(m, f.data.train.examples, {}, f.config.train, opt);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
  }
}

TEST(Train, EarlyStopCallback) {
  auto f = toy(60, 16, 10);
  TrainConfig c = f.config.train;
  c.epochs = 4;
  auto m = model_for(f, 10);
  TrainOptions opt;
  opt.on_epoch = [](const EpochRecord& r, const Model&) { return r.epoch < 2; };
  const auto h = train(m, f.data.train.examples, f.data.dev.examples, c, opt);
  EXPECT_EQ(h.epochs.size(), 2u);
  for (const auto& r : h.epochs) {
    EXPECT_GE(r.dev_auc, 0.0);
    EXPECT_LE(r.dev_auc, 0.5);
  }
}

TEST(Train, LossMovingAverageDecreases) {
  auto f = toy(200, 64, 11);
  ASSERT_EQ(f.all.size(), 200u);
  TrainConfig c = f.config.train;
  c.epochs = 3;
  auto m = model_for(f, 11);
  TrainOptions opt;
  opt.evaluate_dev = false;
  const auto h = train(m, f.all, {}, c, opt);
  ASSERT_EQ(h.step_losses.size(), 60u);
  constexpr std::size_t kWindow = 20;
  std::vector<double> ma;
  for (std::size_t end = kWindow; end <= h.step_losses.size(); ++end) {
    double s = 0.0;
    for (std::size_t i = end - kWindow; i < end; ++i) s += h.step_losses[i];
    ma.push_back(s / kWindow);
  }
  // Non-overlapping windows: one per epoch.
  EXPECT_GT(ma[0], ma[20]);
  EXPECT_GT(ma[20], ma[40]);
  EXPECT_LT(ma.back(), std::log(2.0));
}

TEST(AccuracyAtZero, ZeroHeadPredictsNegative) {
  auto f = toy(60, 16, 12);
  auto m = model_for(f, 12);
  for (double& w : m.head.weight.values()) w = 0.0;
  const auto& ex = f.data.dev.examples;
  std::size_t negatives = 0;
  for (const auto& e : ex) negatives += e.label == 0;
  EXPECT_DOUBLE_EQ(accuracy_at_zero(m, ex), static_cast<double>(negatives) / ex.size());
}
