#include "contpat/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "contpat/autodiff/ops.hpp"

namespace contpat {

std::vector<ad::Tensor*> Model::parameters() {
  std::vector<ad::Tensor*> out;
  visit([&](const std::string&, ad::Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const ad::Tensor& t) { n += t.size(); });
  return n;
}

void Model::zero_grad() {
  visit([](const std::string&, ad::Tensor& t) { t.zero_grad(); });
}

Model make_model(const EncoderConfig& config, std::size_t base_vocab,
                 std::vector<PatternSpec> patterns, std::uint64_t seed) {
  config.validate();
  if (patterns.empty()) throw ConfigError("a model needs at least one pattern");
  std::size_t longest = 0;
  for (const auto& p : patterns) {
    validate_pattern(p, base_vocab);
    for (TokenId t : p.tokens) {
      if (t >= config.vocab_size) {
        throw ConfigError("pattern token " + std::to_string(t) + " outside vocab_size " +
                          std::to_string(config.vocab_size));
      }
    }
    longest = std::max(longest, p.k());
  }
  if (config.max_len < 3 + longest) {
    throw ConfigError("max_len " + std::to_string(config.max_len) +
                      " cannot hold patterns of length " + std::to_string(longest));
  }
  Model m;
  m.config = config;
  m.base_vocab = base_vocab;
  m.encoder = init_params(config, seed);
  m.patterns = std::move(patterns);
  Rng rng(derive_seed(seed, 0x4ead));
  std::normal_distribution<double> normal(0.0, kInitStddev);
  m.head.weight = ad::Tensor({config.d_model, 2}, true);
  for (double& v : m.head.weight.values()) v = normal(rng);
  m.head.bias = ad::Tensor({2}, true);
  return m;
}

std::vector<TokenId> pattern_input(const Model& model, const PatternSpec& spec,
                                   const Example& example) {
  try {
    return build_input(spec, example.premise_ids, example.hypothesis_ids, model.config.max_len);
  } catch (const LengthError& e) {
    throw LengthError(example.pair_id + ": " + e.what());
  }
}

namespace {

template <class M>
ad::Var logits_impl(ad::Graph& g, M& model, std::span<const std::vector<TokenId>> inputs,
                    bool training, double head_dropout, Rng& rng) {
  auto pooled = encode_batch(g, model.encoder, model.config, inputs, training, rng);
  pooled = ad::dropout(pooled, head_dropout, rng, training);
  return ad::add(ad::matmul(pooled, g.parameter(model.head.weight)),
                 g.parameter(model.head.bias));
}

Probabilities row_probabilities(const ad::Tensor& logits, std::size_t r) {
  const double a = logits.at(r, 0), b = logits.at(r, 1);
  const double mx = std::max(a, b);
  const double ea = std::exp(a - mx), eb = std::exp(b - mx);
  return {eb / (ea + eb), ea / (ea + eb)};
}

}  // namespace

ad::Var batch_logits(ad::Graph& graph, Model& model, std::span<const std::vector<TokenId>> inputs,
                     bool training, double head_dropout, Rng& rng) {
  return logits_impl(graph, model, inputs, training, head_dropout, rng);
}

ad::Var batch_logits(ad::Graph& graph, const Model& model,
                     std::span<const std::vector<TokenId>> inputs, bool training,
                     double head_dropout, Rng& rng) {
  return logits_impl(graph, model, inputs, training, head_dropout, rng);
}

Probabilities predict_proba(const Model& model, const PatternSpec& spec,
                            std::span<const TokenId> premise, std::span<const TokenId> hypothesis,
                            bool training, Rng& rng) {
  std::vector<std::vector<TokenId>> inputs{
      build_input(spec, premise, hypothesis, model.config.max_len)};
  ad::Graph g(false);
  auto logits = batch_logits(g, model, inputs, training, kHeadDropout, rng);
  return row_probabilities(logits.value(), 0);
}

ScoredPair combine_probabilities(std::vector<Probabilities> per_pattern) {
  if (per_pattern.empty()) throw ConfigError("cannot combine an empty pattern set");
  ScoredPair out;
  out.per_pattern = std::move(per_pattern);
  out.m1 = out.per_pattern.front().entail;
  out.m0 = out.per_pattern.front().not_entail;
  for (const auto& p : out.per_pattern) {
    out.m1 = std::max(out.m1, p.entail);
    out.m0 = std::max(out.m0, p.not_entail);
  }
  out.s = out.m1 - out.m0;
  return out;
}

ScoredPair combine_patterns(const Model& model, std::span<const PatternSpec> patterns,
                            std::span<const TokenId> premise, std::span<const TokenId> hypothesis) {
  if (patterns.empty()) throw ConfigError("cannot combine an empty pattern set");
  std::vector<std::vector<TokenId>> inputs;
  for (const auto& spec : patterns) {
    inputs.push_back(build_input(spec, premise, hypothesis, model.config.max_len));
  }
  ad::Graph g(false);
  Rng unused(0);
  const auto& logits = batch_logits(g, model, inputs, false, 0.0, unused).value();
  std::vector<Probabilities> probs;
  for (std::size_t i = 0; i < inputs.size(); ++i) probs.push_back(row_probabilities(logits, i));
  return combine_probabilities(std::move(probs));
}

std::vector<ScoredPair> score_examples(const Model& model, std::span<const PatternSpec> patterns,
                                       std::span<const Example> examples,
                                       std::size_t examples_per_batch) {
  if (patterns.empty()) throw ConfigError("cannot combine an empty pattern set");
  examples_per_batch = std::max<std::size_t>(1, examples_per_batch);
  std::vector<ScoredPair> out;
  out.reserve(examples.size());
  Rng unused(0);
  for (std::size_t start = 0; start < examples.size(); start += examples_per_batch) {
    const std::size_t end = std::min(examples.size(), start + examples_per_batch);
    std::vector<std::vector<TokenId>> inputs;
    for (std::size_t i = start; i < end; ++i) {
      for (const auto& spec : patterns) inputs.push_back(pattern_input(model, spec, examples[i]));
    }
    ad::Graph g(false);
    const auto& logits = batch_logits(g, model, inputs, false, 0.0, unused).value();
    for (std::size_t i = start, row = 0; i < end; ++i) {
      std::vector<Probabilities> probs;
      for (std::size_t p = 0; p < patterns.size(); ++p) probs.push_back(row_probabilities(logits, row++));
      out.push_back(combine_probabilities(std::move(probs)));
    }
  }
  return out;
}

std::vector<double> score_values(const Model& model, std::span<const Example> examples) {
  std::vector<double> out;
  for (const auto& sp : score_examples(model, model.patterns, examples)) out.push_back(sp.s);
  return out;
}

}  // namespace contpat
