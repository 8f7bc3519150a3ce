#include "contpat/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "contpat/vocab.hpp"

namespace contpat {
namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace

std::vector<std::string> split_words(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
      continue;
    }
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
    if (!std::isspace(c)) out.emplace_back(1, ch);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Tokenizer Tokenizer::build(std::span<const std::string> corpus, std::size_t max_vocab,
                           bool lowercase) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text, lowercase)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"<s>", "</s>", "<unk>", "<pad>"};
  const std::size_t room = max_vocab > kReservedCount ? max_vocab - kReservedCount : 0;
  for (std::size_t i = 0; i < ranked.size() && i < room; ++i) tokens.push_back(ranked[i].first);
  return from_tokens(std::move(tokens), lowercase);
}

Tokenizer Tokenizer::from_tokens(std::vector<std::string> tokens, bool lowercase) {
  if (tokens.size() < kReservedCount) throw FormatError("token list lacks reserved entries");
  Tokenizer t;
  t.lowercase_ = lowercase;
  t.tokens_ = std::move(tokens);
  for (std::size_t i = kReservedCount; i < t.tokens_.size(); ++i) {
    t.index_.emplace(t.tokens_[i], static_cast<TokenId>(i));
  }
  return t;
}

TokenId Tokenizer::id_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text, lowercase_)) ids.push_back(id_of(w));
  return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += id < tokens_.size() ? tokens_[id] : tokens_[kUnk];
  }
  return out;
}

void tokenize_split(DatasetSplit& split, const Tokenizer& tokenizer) {
  for (auto& e : split.examples) {
    e.premise_ids = tokenizer.encode(e.premise);
    e.hypothesis_ids = tokenizer.encode(e.hypothesis);
    if (e.premise_ids.empty() || e.hypothesis_ids.empty()) {
      throw DataError(e.pair_id + ": premise or hypothesis has no tokens");
    }
  }
}

}  // namespace contpat
