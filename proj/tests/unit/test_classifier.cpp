#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "contpat/classifier.hpp"
#include "contpat/vocab.hpp"

using namespace contpat;

namespace {

constexpr std::size_t kBase = 20;

Model tiny_model(std::size_t n, std::size_t k, PatternFamily fam = PatternFamily::beta,
                 std::uint64_t seed = 1) {
  const auto ext = extend_vocabulary(kBase, n, k);
  EncoderConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 24;
  c.vocab_size = ext.extended_size();
  return make_model(c, kBase, ext.patterns(fam), seed);
}

Example example(std::string id, std::vector<TokenId> p, std::vector<TokenId> h, int label = 0) {
  Example e;
  e.pair_id = std::move(id);
  e.premise_ids = std::move(p);
  e.hypothesis_ids = std::move(h);
  e.label = label;
  return e;
}

}  // namespace

TEST(MakeModel, HeadShapesAndValidation) {
  const auto m = tiny_model(3, 2);
  EXPECT_EQ(m.head.weight.shape(), (ad::Shape{8, 2}));
  EXPECT_EQ(m.head.bias.shape(), (ad::Shape{2}));
  EXPECT_EQ(m.encoder.token_embeddings.shape()[0], kBase + 6);

  std::size_t total = 0;
  m.visit([&](const std::string&, const ad::Tensor& t) { total += t.size(); });
  EXPECT_EQ(m.parameter_count(), total);

  EncoderConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 5;  // needs 3 + k
  c.vocab_size = kBase + 3;
  const auto ext = extend_vocabulary(kBase, 1, 3);
  EXPECT_THROW(make_model(c, kBase, ext.patterns(PatternFamily::beta), 0), ConfigError);
  c.max_len = 6;
  EXPECT_NO_THROW(make_model(c, kBase, ext.patterns(PatternFamily::beta), 0));
  c.vocab_size = kBase + 2;  // last pattern token out of range
  EXPECT_THROW(make_model(c, kBase, ext.patterns(PatternFamily::beta), 0), ConfigError);
  c.vocab_size = kBase + 3;
  EXPECT_THROW(make_model(c, kBase, {}, 0), ConfigError);
}

TEST(PredictProba, ZeroHeadIsUniform) {
  auto m = tiny_model(2, 2);
  for (double& w : m.head.weight.values()) w = 0.0;
  for (double& b : m.head.bias.values()) b = 0.0;
  Rng rng(0);
  for (bool training : {false, true}) {
    const auto pr = predict_proba(m, m.patterns[0], std::vector<TokenId>{5, 6}, std::vector<TokenId>{7},
                                  training, rng);
    EXPECT_DOUBLE_EQ(pr.entail, 0.5);
    EXPECT_DOUBLE_EQ(pr.not_entail, 0.5);
  }
}

TEST(PredictProba, EvalDeterministicAndNormalized) {
  const auto m = tiny_model(2, 2);
  Rng r1(0), r2(5);
  const std::vector<TokenId> p{5, 6}, h{7, 8};
  const auto a = predict_proba(m, m.patterns[1], p, h, false, r1);
  const auto b = predict_proba(m, m.patterns[1], p, h, false, r2);
  EXPECT_EQ(a.entail, b.entail);
  EXPECT_EQ(a.not_entail, b.not_entail);
  EXPECT_NEAR(a.entail + a.not_entail, 1.0, 1e-12);
}

TEST(PatternInput, LengthErrorNamesPair) {
  const auto m = tiny_model(1, 2);
  const auto e = example("test-17", std::vector<TokenId>(15, 5), std::vector<TokenId>(6, 6));
  try {
    pattern_input(m, m.patterns[0], e);
    FAIL() << "expected LengthError";
  } catch (const LengthError& err) {
    EXPECT_NE(std::string(err.what()).find("test-17"), std::string::npos);
  }
}

TEST(Combine, Examples) {
  const auto single = combine_probabilities({{0.7, 0.3}});
  EXPECT_NEAR(single.s, 0.4, 1e-15);
  EXPECT_NEAR(single.s, 2 * 0.7 - 1, 1e-15);

  const auto two = combine_probabilities({{0.9, 0.1}, {0.3, 0.7}});
  EXPECT_DOUBLE_EQ(two.m1, 0.9);
  EXPECT_DOUBLE_EQ(two.m0, 0.7);
  EXPECT_NEAR(two.s, 0.2, 1e-15);

  EXPECT_THROW(combine_probabilities({}), ConfigError);
  const auto m = tiny_model(1, 1);
  EXPECT_THROW(combine_patterns(m, {}, std::vector<TokenId>{5}, std::vector<TokenId>{6}), ConfigError);
}

TEST(Combine, MonotoneInSingleP1) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Probabilities> ps(4);
    for (auto& p : ps) {
      p.entail = u(rng);
      p.not_entail = 1.0 - p.entail;
    }
    const double before = combine_probabilities(ps).s;
    const double bump = u(rng) * (1.0 - ps[1].entail);
    ps[1].entail += bump;
    ps[1].not_entail = 1.0 - ps[1].entail;
    EXPECT_GE(combine_probabilities(ps).s, before - 1e-15);
  }
}

TEST(Combine, SinglePatternIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = tiny_model(1, 2, PatternFamily::beta, seed);
    Rng rng(seed);
    std::normal_distribution<double> wide(0.0, 3.0);
    for (double& w : m.head.weight.values()) w = wide(rng);
    const auto sp = combine_patterns(m, m.patterns, std::vector<TokenId>{5, 9}, std::vector<TokenId>{11});
    EXPECT_NEAR(sp.s, 2.0 * sp.per_pattern[0].entail - 1.0, 1e-12);
  }
}

TEST(ScoreExamples, MatchesCombinePatternsAcrossBatching) {
  const auto m = tiny_model(3, 3, PatternFamily::alpha);
  std::vector<Example> ex;
  Rng rng(4);
  std::uniform_int_distribution<TokenId> word(kReservedCount, kBase - 1);
  std::uniform_int_distribution<std::size_t> len(1, 5);
  for (int i = 0; i < 11; ++i) {
    std::vector<TokenId> p(len(rng)), h(len(rng));
    for (auto& t : p) t = word(rng);
    for (auto& t : h) t = word(rng);
    ex.push_back(example("e" + std::to_string(i), p, h));
  }
  const auto batched = score_examples(m, m.patterns, ex, 4);
  const auto whole = score_examples(m, m.patterns, ex, 64);
  const auto values = score_values(m, ex);
  ASSERT_EQ(batched.size(), ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const auto one = combine_patterns(m, m.patterns, ex[i].premise_ids, ex[i].hypothesis_ids);
    EXPECT_EQ(batched[i].s, one.s);
    EXPECT_EQ(whole[i].s, one.s);
    EXPECT_EQ(values[i], one.s);
  }
}

TEST(Decide, Examples) {
  EXPECT_EQ(decide(0.2, 0.0), 1);
  EXPECT_EQ(decide(std::nextafter(-0.0768, -1.0), -0.0768), 0);
  EXPECT_EQ(decide(std::nextafter(-0.0768, 1.0), -0.0768), 1);
  EXPECT_EQ(decide(-0.0768, -0.0768), 0);
  EXPECT_EQ(decide(0.0, 0.0), 0);
  EXPECT_EQ(decide(-0.0, 0.0), 0);
}

TEST(Decide, MonotoneInScore) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double a = u(rng), b = u(rng);
    const double t = u(rng);
    if (a > b) std::swap(a, b);
    EXPECT_LE(decide(a, t), decide(b, t));
  }
}
