#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "contpat/common.hpp"

namespace contpat {

struct Example {
  std::string pair_id;
  std::string premise;
  std::string hypothesis;
  int label = 0;
  std::vector<TokenId> premise_ids;
  std::vector<TokenId> hypothesis_ids;
};

struct SplitStats {
  std::size_t total = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double positive_rate = 0.0;
};

SplitStats compute_stats(std::span<const Example> examples);

struct DatasetSplit {
  std::string name;
  std::vector<Example> examples;
  SplitStats stats;

  void refresh_stats() { stats = compute_stats(examples); }
};

// Three tab-separated columns per line: premise, hypothesis, label (0/1).
// Pair ids are "{split}-{line}" with 1-based line numbers.
DatasetSplit parse_tsv(std::istream& in, const std::string& split_name);
DatasetSplit load_tsv(const std::filesystem::path& path, const std::string& split_name);
void write_tsv(const DatasetSplit& split, std::ostream& out);
void save_tsv(const DatasetSplit& split, const std::filesystem::path& path);

}  // namespace contpat
