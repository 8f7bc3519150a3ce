#include "contpat/patterning.hpp"

#include "contpat/vocab.hpp"

namespace contpat {

std::string_view to_string(PatternFamily family) {
  switch (family) {
    case PatternFamily::alpha: return "alpha";
    case PatternFamily::beta: return "beta";
    case PatternFamily::discrete: return "discrete";
  }
  return "?";
}

PatternFamily parse_family(std::string_view name) {
  if (name == "alpha") return PatternFamily::alpha;
  if (name == "beta") return PatternFamily::beta;
  if (name == "discrete") return PatternFamily::discrete;
  throw ConfigError("unknown pattern family '" + std::string(name) + "'");
}

std::vector<PatternSpec> VocabularyExtension::patterns(PatternFamily family) const {
  if (family == PatternFamily::discrete) {
    throw ParameterError("continuous tokens cannot form discrete patterns");
  }
  std::vector<PatternSpec> out;
  out.reserve(n);
  for (const auto& ids : c_ids) out.push_back({family, ids});
  return out;
}

VocabularyExtension extend_vocabulary(std::size_t base_size, std::size_t n, std::size_t k) {
  if (n == 0) throw ParameterError("extend_vocabulary: need at least one pattern");
  VocabularyExtension ext{base_size, n, k, {}};
  ext.c_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      ext.c_ids[i].push_back(static_cast<TokenId>(base_size + i * k + j));
    }
  }
  return ext;
}

SegmentLengths segment_lengths(std::size_t k) {
  const std::size_t a = k / 3;
  const std::size_t b = k / 3 + k % 3;
  return {a, b, k - a - b};
}

void validate_pattern(const PatternSpec& spec, std::size_t base_size) {
  for (TokenId t : spec.tokens) {
    const bool fresh = t >= base_size;
    if (spec.family == PatternFamily::discrete && fresh) {
      throw ParameterError("discrete pattern token " + std::to_string(t) +
                           " lies outside the base vocabulary");
    }
    if (spec.family != PatternFamily::discrete && !fresh) {
      throw ParameterError("continuous pattern token " + std::to_string(t) +
                           " collides with the base vocabulary");
    }
  }
}

std::vector<TokenId> build_template(const PatternSpec& spec, std::span<const TokenId> premise,
                                    std::span<const TokenId> hypothesis) {
  if (premise.empty() || hypothesis.empty()) {
    throw ParameterError("build_template: premise and hypothesis must be nonempty");
  }
  const auto& c = spec.tokens;
  SegmentLengths seg{0, c.size(), 0};
  if (spec.family == PatternFamily::alpha) seg = segment_lengths(c.size());

  std::vector<TokenId> out;
  out.reserve(premise.size() + hypothesis.size() + c.size());
  auto next = c.begin();
  out.insert(out.end(), next, next + seg.prefix);
  next += seg.prefix;
  out.insert(out.end(), premise.begin(), premise.end());
  out.insert(out.end(), next, next + seg.middle);
  next += seg.middle;
  out.insert(out.end(), hypothesis.begin(), hypothesis.end());
  out.insert(out.end(), next, c.end());
  return out;
}

std::vector<TokenId> build_input(const PatternSpec& spec, std::span<const TokenId> premise,
                                 std::span<const TokenId> hypothesis, std::size_t max_len) {
  const std::size_t len = premise.size() + hypothesis.size() + spec.k() + 2;
  if (len > max_len) {
    throw LengthError("template of length " + std::to_string(len) + " exceeds max_len " +
                      std::to_string(max_len));
  }
  std::vector<TokenId> out;
  out.reserve(len);
  out.push_back(kBos);
  auto body = build_template(spec, premise, hypothesis);
  out.insert(out.end(), body.begin(), body.end());
  out.push_back(kEos);
  return out;
}

}  // namespace contpat
