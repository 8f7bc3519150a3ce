#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "contpat/autodiff/graph.hpp"
#include "contpat/common.hpp"

namespace contpat::ad {

// [m x n] . [n x p] -> [m x p]. In a no-grad graph each output row is
// bit-identical whatever the number of rows in `a`.
Var matmul(Var a, Var b);

// Binary pointwise ops accept equal shapes, or a length-n vector `b`
// broadcast over the rows of an [m x n] `a`.
Var add(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var x, double factor);
Var tanh(Var x);
// Exact (erf) form.
Var gelu(Var x);
Var sum(Var x);

// Row-wise softmax with max subtraction.
Var softmax_rows(Var x);

// Row lookup; the backward pass scatter-adds, so repeated ids accumulate.
Var gather_rows(Var table, std::span<const std::size_t> ids);

inline constexpr double kLayerNormEps = 1e-5;
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);

// Inverted dropout. Identity when !training or rate == 0.
Var dropout(Var x, double rate, Rng& rng, bool training);

// Mean over rows of -log softmax(logits)[label]; logits are [m x 2].
Var nll_from_logits(Var logits, std::span<const int> labels);

// Contiguous block of rows forming one sequence in a stacked batch.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Multi-head scaled dot-product self-attention over each segment of the
// stacked projections q, k, v ([T x d] each). Heads split the columns
// evenly. Dropout with `rate` applies to attention weights in training.
// When `weights_out` is given, the post-softmax weights of every
// (segment, head) block are appended to it, segment-major.
Var multi_head_attention(Var q, Var k, Var v, std::span<const Segment> segments,
                         std::size_t n_heads, double rate, Rng& rng,
                         bool training, std::vector<Tensor>* weights_out = nullptr);

}  // namespace contpat::ad
