#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "contpat/common.hpp"
#include "contpat/data.hpp"

namespace contpat {

// Word-level tokens: runs of alphanumerics (plus '_' and non-ASCII bytes),
// each other non-space character on its own.
std::vector<std::string> split_words(std::string_view text, bool lowercase);

class Tokenizer {
 public:
  // Frequency-ranked vocabulary, ties broken lexicographically, truncated to
  // max_vocab - 4 entries after the reserved <s>, </s>, <unk>, <pad>.
  static Tokenizer build(std::span<const std::string> corpus, std::size_t max_vocab,
                         bool lowercase = true);
  // Rebuilds from a stored id-ordered token list (reserved entries first).
  static Tokenizer from_tokens(std::vector<std::string> tokens, bool lowercase);

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  bool lowercase() const noexcept { return lowercase_; }
  TokenId id_of(std::string_view word) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  bool lowercase_ = true;
};

// Fills premise_ids / hypothesis_ids; throws DataError on an empty side.
void tokenize_split(DatasetSplit& split, const Tokenizer& tokenizer);

}  // namespace contpat
