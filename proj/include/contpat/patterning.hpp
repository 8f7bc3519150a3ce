#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contpat/common.hpp"

namespace contpat {

// alpha: pattern tokens around and between premise and hypothesis.
// beta: pattern tokens only between them.
// discrete: beta layout over existing vocabulary words.
enum class PatternFamily { alpha, beta, discrete };

std::string_view to_string(PatternFamily family);
PatternFamily parse_family(std::string_view name);

struct PatternSpec {
  PatternFamily family = PatternFamily::beta;
  std::vector<TokenId> tokens;

  std::size_t k() const noexcept { return tokens.size(); }
  bool operator==(const PatternSpec&) const = default;
};

// Fresh continuous tokens appended after a base vocabulary. Pattern i owns
// ids base_size + i*k ... base_size + (i+1)*k - 1.
struct VocabularyExtension {
  std::size_t base_size = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::vector<TokenId>> c_ids;

  std::size_t added_tokens() const noexcept { return n * k; }
  std::size_t extended_size() const noexcept { return base_size + n * k; }
  std::size_t added_parameters(std::size_t d_model) const noexcept { return n * k * d_model; }
  std::vector<PatternSpec> patterns(PatternFamily family) const;
};

VocabularyExtension extend_vocabulary(std::size_t base_size, std::size_t n, std::size_t k);

struct SegmentLengths {
  std::size_t prefix = 0;  // before the premise
  std::size_t middle = 0;  // between premise and hypothesis
  std::size_t suffix = 0;  // after the hypothesis
  bool operator==(const SegmentLengths&) const = default;
};

// prefix = floor(k/3), middle = floor(k/3) + k mod 3, suffix = k - prefix - middle.
SegmentLengths segment_lengths(std::size_t k);

// Throws ParameterError unless the spec's tokens are fresh (alpha/beta) or
// base-vocabulary (discrete) ids relative to `base_size`.
void validate_pattern(const PatternSpec& spec, std::size_t base_size);

// Arranges premise, hypothesis and the spec's tokens (in order):
//   alpha:          c_1..c_a  p  c_{a+1}..c_{a+b}  h  c_{a+b+1}..c_k
//   beta, discrete: p  c_1..c_k  h
std::vector<TokenId> build_template(const PatternSpec& spec, std::span<const TokenId> premise,
                                    std::span<const TokenId> hypothesis);

// build_template wrapped in BOS ... EOS; throws LengthError when the result
// exceeds `max_len`.
std::vector<TokenId> build_input(const PatternSpec& spec, std::span<const TokenId> premise,
                                 std::span<const TokenId> hypothesis, std::size_t max_len);

}  // namespace contpat
