#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "contpat/autodiff/gradcheck.hpp"
#include "contpat/autodiff/ops.hpp"
#include "contpat/encoder.hpp"
#include "contpat/vocab.hpp"

using namespace contpat;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_len = 12;
  c.vocab_size = 30;
  return c;
}

std::vector<TokenId> seq(std::initializer_list<TokenId> body) {
  std::vector<TokenId> out{kBos};
  out.insert(out.end(), body);
  return out;
}

double cosine_of(const std::vector<double>& a, const std::vector<double>& b) {
  const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
  const double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  return dot / (na * nb);
}

}  // namespace

TEST(EncoderConfig, Validation) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.vocab_size = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.internal_dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(InitParams, ShapesAndDeterminism) {
  EncoderConfig c;
  c.vocab_size = 1000 + 5 * 2;
  const auto a = init_params(c, 7);
  EXPECT_EQ(a.token_embeddings.shape(), (ad::Shape{1010, 64}));
  EXPECT_EQ(a.position_embeddings.shape(), (ad::Shape{128, 64}));
  EXPECT_EQ(a.layers.size(), 2u);
  EXPECT_EQ(a.pooler_weight.shape(), (ad::Shape{64, 64}));

  const auto b = init_params(c, 7);
  std::size_t tensors = 0;
  std::vector<const ad::Tensor*> bt;
  b.visit([&](const std::string&, const ad::Tensor& t) { bt.push_back(&t); });
  a.visit([&](const std::string& name, const ad::Tensor& t) {
    ASSERT_EQ(t.size(), bt[tensors]->size()) << name;
    EXPECT_EQ(std::memcmp(t.values().data(), bt[tensors]->values().data(), t.size() * sizeof(double)), 0)
        << name;
    ++tensors;
  });
  EXPECT_EQ(tensors, bt.size());
}

TEST(InitParams, Distribution) {
  EncoderConfig c;
  c.vocab_size = 2000;
  const auto p = init_params(c, 3);
  // 2000 x 64 = 1.28e5 draws.
  const auto v = p.token_embeddings.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  EXPECT_LE(std::abs(mean), 0.001);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  EXPECT_NEAR(std::sqrt(var / v.size()), kInitStddev, 0.001);

  for (const auto& layer : p.layers) {
    for (double g : layer.attention_norm_gain.values()) EXPECT_EQ(g, 1.0);
    for (double b : layer.query_bias.values()) EXPECT_EQ(b, 0.0);
    for (double b : layer.ff_out_bias.values()) EXPECT_EQ(b, 0.0);
  }
  for (double b : p.pooler_bias.values()) EXPECT_EQ(b, 0.0);
}

TEST(Encode, ShapeAndRange) {
  const auto c = small_config();
  const auto p = init_params(c, 1);
  Rng rng(0);
  for (std::size_t len = 1; len <= c.max_len; ++len) {
    std::vector<TokenId> ids(len, 9);
    ids[0] = kBos;
    const auto out = encode(p, c, ids, false, rng);
    ASSERT_EQ(out.size(), c.d_model);
    for (double x : out) {
      EXPECT_GT(x, -1.0);
      EXPECT_LT(x, 1.0);
    }
  }
}

TEST(Encode, Errors) {
  const auto c = small_config();
  const auto p = init_params(c, 1);
  Rng rng(0);
  std::vector<TokenId> too_long(c.max_len + 1, 5);
  too_long[0] = kBos;
  try {
    encode(p, c, too_long, false, rng);
    FAIL() << "expected LengthError";
  } catch (const LengthError& e) {
    EXPECT_NE(std::string(e.what()).find("12"), std::string::npos) << e.what();
  }
  const std::vector<TokenId> no_bos{5, 6};
  EXPECT_THROW(encode(p, c, no_bos, false, rng), LengthError);
  const std::vector<TokenId> bad_id{kBos, 30};
  EXPECT_THROW(encode(p, c, bad_id, false, rng), IndexError);
}

TEST(Encode, EvalModeIsPure) {
  const auto c = small_config();
  const auto p = init_params(c, 2);
  Rng r1(1), r2(99);
  const auto ids = seq({5, 6, 7, kEos});
  const auto a = encode(p, c, ids, false, r1);
  const auto b = encode(p, c, ids, false, r2);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(Encode, TrainingModeDropoutVaries) {
  auto c = small_config();
  c.internal_dropout = 0.5;
  const auto p = init_params(c, 2);
  Rng rng(1);
  const auto ids = seq({5, 6, 7, kEos});
  const auto a = encode(p, c, ids, true, rng);
  const auto b = encode(p, c, ids, true, rng);
  EXPECT_NE(a, b);
}

TEST(Encode, PositionsMatter) {
  const auto c = small_config();
  auto p = init_params(c, 4);
  // Spread weights as a trained model would have them.
  Rng init(11);
  std::normal_distribution<double> normal(0.0, 0.3);
  p.visit([&](const std::string& name, ad::Tensor& t) {
    if (name.find("gain") != std::string::npos) return;
    for (double& v : t.values()) v = normal(init);
  });
  Rng rng(0);
  const auto a = encode(p, c, seq({5, 6, 7, 8}), false, rng);
  const auto b = encode(p, c, seq({8, 7, 6, 5}), false, rng);
  EXPECT_LT(cosine_of(a, b), 1.0 - 1e-6);
}

TEST(Encode, BatchMatchesSingle) {
  const auto c = small_config();
  const auto p = init_params(c, 5);
  const std::vector<std::vector<TokenId>> batch{seq({5, 6}), seq({7, 8, 9, 10, 11}), seq({12})};
  ad::Graph g(false);
  Rng rng(0);
  const auto pooled = encode_batch(g, p, c, batch, false, rng);
  ASSERT_EQ(pooled.shape(), (ad::Shape{3, c.d_model}));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto single = encode(p, c, batch[i], false, rng);
    for (std::size_t j = 0; j < c.d_model; ++j) {
      EXPECT_EQ(pooled.value()[i * c.d_model + j], single[j]) << i << "," << j;
    }
  }
}

TEST(Encode, AttentionRowsAreDistributions) {
  const auto c = small_config();
  const auto p = init_params(c, 6);
  const std::vector<std::vector<TokenId>> batch{seq({5, 6, 7}), seq({8, 9})};
  ad::Graph g(false);
  Rng rng(0);
  EncoderTrace trace;
  encode_batch(g, p, c, batch, false, rng, &trace);
  ASSERT_EQ(trace.attention_weights.size(), c.n_layers);
  for (const auto& layer : trace.attention_weights) {
    ASSERT_EQ(layer.size(), batch.size() * c.n_heads);
    for (const auto& w : layer) {
      const std::size_t L = w.shape()[0];
      for (std::size_t r = 0; r < L; ++r) {
        double sum = 0.0;
        for (std::size_t col = 0; col < L; ++col) sum += w[r * L + col];
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
    }
  }
}

TEST(Encode, GradientReachesEveryGroup) {
  const auto c = small_config();
  auto p = init_params(c, 8);
  const std::vector<std::vector<TokenId>> batch{seq({5, 6, 7, kEos}), seq({9, 10, kEos})};
  ad::Graph g;
  Rng rng(0);
  auto pooled = encode_batch(g, p, c, batch, false, rng);
  Rng wr(3);
  ad::Tensor weights({2, c.d_model});
  std::normal_distribution<double> normal;
  for (double& v : weights.values()) v = normal(wr);
  g.backward(ad::sum(ad::mul(pooled, g.constant(weights))));
  p.visit([&](const std::string& name, const ad::Tensor& t) {
    ASSERT_TRUE(t.has_grad()) << name;
    double mx = 0.0;
    for (double x : t.grad()) mx = std::max(mx, std::abs(x));
    EXPECT_GT(mx, 0.0) << name;
  });
}

TEST(Encode, FiniteDifferences) {
  auto c = small_config();
  c.n_heads = 1;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto p = init_params(c, seed);
    Rng init(derive_seed(seed, 1));
    std::normal_distribution<double> normal(0.0, 0.3);
    p.visit([&](const std::string& name, ad::Tensor& t) {
      if (name.find("gain") != std::string::npos) return;
      for (double& v : t.values()) v = normal(init);
    });
    const std::vector<std::vector<TokenId>> batch{seq({5, 6, 7}), seq({8, 9})};
    ad::Tensor weights({2, c.d_model});
    for (double& v : weights.values()) v = normal(init);
    std::vector<ad::Tensor*> params;
    p.visit([&](const std::string&, ad::Tensor& t) { params.push_back(&t); });
    const auto res = ad::finite_diff_check(
        [&](ad::Graph& g) {
          Rng dropout(seed);
          auto pooled = encode_batch(g, p, c, batch, true, dropout);
          return ad::sum(ad::mul(pooled, g.constant(weights)));
        },
        params, {.step = 1e-5, .samples = 100, .seed = seed});
    EXPECT_LE(res.max_rel_error, 1e-4) << "seed " << seed;
  }
}
