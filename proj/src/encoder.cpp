#include "contpat/encoder.hpp"

#include "contpat/autodiff/ops.hpp"
#include "contpat/vocab.hpp"

namespace contpat {

void EncoderConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (max_len < 3) throw ConfigError("max_len must be at least 3");
  if (!(internal_dropout >= 0.0 && internal_dropout < 1.0)) {
    throw ConfigError("internal_dropout must lie in [0, 1)");
  }
  if (vocab_size <= kReservedCount) throw ConfigError("vocab_size must exceed the reserved ids");
}

namespace {

ad::Tensor normal_matrix(ad::Shape shape, Rng& rng) {
  ad::Tensor t(std::move(shape), true);
  std::normal_distribution<double> normal(0.0, kInitStddev);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

ad::Tensor filled(std::size_t n, double value) {
  return ad::Tensor({n}, std::vector<double>(n, value), true);
}

template <class Params>
ad::Var encode_impl(ad::Graph& g, Params& p, const EncoderConfig& config,
                    std::span<const std::vector<TokenId>> sequences, bool training, Rng& rng,
                    EncoderTrace* trace) {
  std::vector<std::size_t> ids, positions, firsts;
  std::vector<ad::Segment> segments;
  for (const auto& seq : sequences) {
    if (seq.empty() || seq.front() != kBos) {
      throw LengthError("encoder input must start with the BOS token");
    }
    if (seq.size() > config.max_len) {
      throw LengthError("sequence of length " + std::to_string(seq.size()) +
                        " exceeds max_len " + std::to_string(config.max_len));
    }
    segments.push_back({ids.size(), seq.size()});
    firsts.push_back(ids.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      ids.push_back(seq[i]);
      positions.push_back(i);
    }
  }
  const double drop = config.internal_dropout;
  auto bind = [&g](auto& t) { return g.parameter(t); };

  ad::Var x = ad::add(ad::gather_rows(bind(p.token_embeddings), ids),
                      ad::gather_rows(bind(p.position_embeddings), positions));
  if (trace) trace->attention_weights.assign(p.layers.size(), {});
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    auto q = ad::add(ad::matmul(x, bind(layer.query_weight)), bind(layer.query_bias));
    // No key bias: it would shift a whole score row and cancel in the softmax.
    auto k = ad::matmul(x, bind(layer.key_weight));
    auto v = ad::add(ad::matmul(x, bind(layer.value_weight)), bind(layer.value_bias));
    auto ctx = ad::multi_head_attention(q, k, v, segments, config.n_heads, drop, rng, training,
                                        trace ? &trace->attention_weights[l] : nullptr);
    auto attn = ad::add(ad::matmul(ctx, bind(layer.output_weight)), bind(layer.output_bias));
    x = ad::layer_norm(ad::add(x, attn), bind(layer.attention_norm_gain),
                       bind(layer.attention_norm_bias));
    auto hidden = ad::gelu(ad::add(ad::matmul(x, bind(layer.ff_in_weight)), bind(layer.ff_in_bias)));
    auto ff = ad::add(ad::matmul(hidden, bind(layer.ff_out_weight)), bind(layer.ff_out_bias));
    ff = ad::dropout(ff, drop, rng, training);
    x = ad::layer_norm(ad::add(x, ff), bind(layer.ff_norm_gain), bind(layer.ff_norm_bias));
  }
  auto first = ad::gather_rows(x, firsts);
  return ad::tanh(ad::add(ad::matmul(first, bind(p.pooler_weight)), bind(p.pooler_bias)));
}

}  // namespace

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.d_model, f = config.d_ff;
  EncoderParams p;
  p.token_embeddings = normal_matrix({config.vocab_size, d}, rng);
  p.position_embeddings = normal_matrix({config.max_len, d}, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    EncoderLayer layer;
    layer.query_weight = normal_matrix({d, d}, rng);
    layer.query_bias = filled(d, 0.0);
    layer.key_weight = normal_matrix({d, d}, rng);
    layer.value_weight = normal_matrix({d, d}, rng);
    layer.value_bias = filled(d, 0.0);
    layer.output_weight = normal_matrix({d, d}, rng);
    layer.output_bias = filled(d, 0.0);
    layer.attention_norm_gain = filled(d, 1.0);
    layer.attention_norm_bias = filled(d, 0.0);
    layer.ff_in_weight = normal_matrix({d, f}, rng);
    layer.ff_in_bias = filled(f, 0.0);
    layer.ff_out_weight = normal_matrix({f, d}, rng);
    layer.ff_out_bias = filled(d, 0.0);
    layer.ff_norm_gain = filled(d, 1.0);
    layer.ff_norm_bias = filled(d, 0.0);
    p.layers.push_back(std::move(layer));
  }
  p.pooler_weight = normal_matrix({d, d}, rng);
  p.pooler_bias = filled(d, 0.0);
  return p;
}

ad::Var encode_batch(ad::Graph& graph, EncoderParams& params, const EncoderConfig& config,
                     std::span<const std::vector<TokenId>> sequences, bool training, Rng& rng,
                     EncoderTrace* trace) {
  return encode_impl(graph, params, config, sequences, training, rng, trace);
}

ad::Var encode_batch(ad::Graph& graph, const EncoderParams& params, const EncoderConfig& config,
                     std::span<const std::vector<TokenId>> sequences, bool training, Rng& rng,
                     EncoderTrace* trace) {
  return encode_impl(graph, params, config, sequences, training, rng, trace);
}

std::vector<double> encode(const EncoderParams& params, const EncoderConfig& config,
                           std::span<const TokenId> ids, bool training, Rng& rng) {
  ad::Graph g(false);
  std::vector<std::vector<TokenId>> batch{std::vector<TokenId>(ids.begin(), ids.end())};
  auto pooled = encode_batch(g, params, config, batch, training, rng).value().values();
  return {pooled.begin(), pooled.end()};
}

}  // namespace contpat
