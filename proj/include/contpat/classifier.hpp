#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contpat/autodiff/graph.hpp"
#include "contpat/data.hpp"
#include "contpat/encoder.hpp"
#include "contpat/patterning.hpp"

namespace contpat {

// Linear head shared by every pattern of a model: logits = pooled W + b.
struct ClassifierHead {
  ad::Tensor weight;  // [d x 2]; column 0 scores non-entailment, column 1 entailment
  ad::Tensor bias;    // [2]
};

inline constexpr double kHeadDropout = 0.1;

struct Model {
  EncoderConfig config;
  std::size_t base_vocab = 0;  // size of the word vocabulary before pattern tokens
  EncoderParams encoder;
  ClassifierHead head;
  std::vector<PatternSpec> patterns;

  template <class F>
  void visit(F&& f) {
    encoder.visit(f);
    f(std::string("head.weight"), head.weight);
    f(std::string("head.bias"), head.bias);
  }
  template <class F>
  void visit(F&& f) const {
    encoder.visit(f);
    f(std::string("head.weight"), head.weight);
    f(std::string("head.bias"), head.bias);
  }

  std::vector<ad::Tensor*> parameters();
  std::size_t parameter_count() const;
  void zero_grad();
};

// `config.vocab_size` must already include the pattern tokens. Validates
// each pattern against `base_vocab` and the template length budget.
Model make_model(const EncoderConfig& config, std::size_t base_vocab,
                 std::vector<PatternSpec> patterns, std::uint64_t seed);

struct Probabilities {
  double entail = 0.5;      // P(y = 1)
  double not_entail = 0.5;  // P(y = 0)
};

// One encoder input per (example, pattern): BOS + template + EOS.
std::vector<TokenId> pattern_input(const Model& model, const PatternSpec& spec,
                                   const Example& example);

// Logits [B x 2] for a batch of encoder inputs. Dropout with `head_dropout`
// is applied to the pooled vectors in training mode.
ad::Var batch_logits(ad::Graph& graph, Model& model,
                     std::span<const std::vector<TokenId>> inputs, bool training,
                     double head_dropout, Rng& rng);
ad::Var batch_logits(ad::Graph& graph, const Model& model,
                     std::span<const std::vector<TokenId>> inputs, bool training,
                     double head_dropout, Rng& rng);

Probabilities predict_proba(const Model& model, const PatternSpec& spec,
                            std::span<const TokenId> premise, std::span<const TokenId> hypothesis,
                            bool training, Rng& rng);

struct ScoredPair {
  std::vector<Probabilities> per_pattern;
  double m1 = 0.0;  // max entailment probability over patterns
  double m0 = 0.0;  // max non-entailment probability over patterns
  double s = 0.0;   // m1 - m0
};

ScoredPair combine_probabilities(std::vector<Probabilities> per_pattern);

ScoredPair combine_patterns(const Model& model, std::span<const PatternSpec> patterns,
                            std::span<const TokenId> premise, std::span<const TokenId> hypothesis);

// Eval-mode scores for many examples against a pattern set, batched.
std::vector<ScoredPair> score_examples(const Model& model, std::span<const PatternSpec> patterns,
                                       std::span<const Example> examples,
                                       std::size_t examples_per_batch = 32);

// Scores against the model's own patterns.
std::vector<double> score_values(const Model& model, std::span<const Example> examples);

// 1 iff s > threshold.
inline int decide(double s, double threshold) { return s > threshold ? 1 : 0; }

}  // namespace contpat
