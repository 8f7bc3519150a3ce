#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contpat/autodiff/graph.hpp"
#include "contpat/common.hpp"

namespace contpat {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_len = 128;
  double internal_dropout = 0.1;
  std::size_t vocab_size = 0;

  void validate() const;
};

struct EncoderLayer {
  ad::Tensor query_weight, query_bias;
  ad::Tensor key_weight;
  ad::Tensor value_weight, value_bias;
  ad::Tensor output_weight, output_bias;
  ad::Tensor attention_norm_gain, attention_norm_bias;
  ad::Tensor ff_in_weight, ff_in_bias;
  ad::Tensor ff_out_weight, ff_out_bias;
  ad::Tensor ff_norm_gain, ff_norm_bias;

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "query_weight", self.query_weight);
    f(prefix + "query_bias", self.query_bias);
    f(prefix + "key_weight", self.key_weight);
    f(prefix + "value_weight", self.value_weight);
    f(prefix + "value_bias", self.value_bias);
    f(prefix + "output_weight", self.output_weight);
    f(prefix + "output_bias", self.output_bias);
    f(prefix + "attention_norm_gain", self.attention_norm_gain);
    f(prefix + "attention_norm_bias", self.attention_norm_bias);
    f(prefix + "ff_in_weight", self.ff_in_weight);
    f(prefix + "ff_in_bias", self.ff_in_bias);
    f(prefix + "ff_out_weight", self.ff_out_weight);
    f(prefix + "ff_out_bias", self.ff_out_bias);
    f(prefix + "ff_norm_gain", self.ff_norm_gain);
    f(prefix + "ff_norm_bias", self.ff_norm_bias);
  }
};

struct EncoderParams {
  ad::Tensor token_embeddings;     // [|vocab| x d]
  ad::Tensor position_embeddings;  // [max_len x d]
  std::vector<EncoderLayer> layers;
  ad::Tensor pooler_weight;  // [d x d]
  ad::Tensor pooler_bias;    // [d]

  // Calls f(name, tensor) for every parameter in a fixed order.
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    f(std::string("encoder.token_embeddings"), self.token_embeddings);
    f(std::string("encoder.position_embeddings"), self.position_embeddings);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      EncoderLayer::visit(self.layers[i], "encoder.layers." + std::to_string(i) + ".", f);
    }
    f(std::string("encoder.pooler_weight"), self.pooler_weight);
    f(std::string("encoder.pooler_bias"), self.pooler_bias);
  }
};

inline constexpr double kInitStddev = 0.02;

// Weights ~ Normal(0, 0.02), biases 0, layer-norm gains 1.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Optional capture of per-layer attention weights, one [L x L] tensor per
// (sequence, head) in sequence-major order.
struct EncoderTrace {
  std::vector<std::vector<ad::Tensor>> attention_weights;
};

// Encodes a batch of BOS-initial sequences into pooled vectors [B x d]:
// token + position embeddings, n_layers post-norm transformer blocks,
// then tanh(W h_0 + b) over each sequence's first position.
//
// The mutable overload binds trainable parameters (gradients flow into
// `params`); the const overload is read-only.
ad::Var encode_batch(ad::Graph& graph, EncoderParams& params, const EncoderConfig& config,
                     std::span<const std::vector<TokenId>> sequences, bool training, Rng& rng,
                     EncoderTrace* trace = nullptr);
ad::Var encode_batch(ad::Graph& graph, const EncoderParams& params, const EncoderConfig& config,
                     std::span<const std::vector<TokenId>> sequences, bool training, Rng& rng,
                     EncoderTrace* trace = nullptr);

// Single-sequence convenience; returns the pooled d-vector.
std::vector<double> encode(const EncoderParams& params, const EncoderConfig& config,
                           std::span<const TokenId> ids, bool training, Rng& rng);

}  // namespace contpat
