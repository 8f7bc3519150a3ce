#include "contpat/data.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace contpat {

SplitStats compute_stats(std::span<const Example> examples) {
  SplitStats s;
  s.total = examples.size();
  for (const auto& e : examples) (e.label == 1 ? s.positives : s.negatives)++;
  s.positive_rate = s.total ? static_cast<double>(s.positives) / static_cast<double>(s.total) : 0.0;
  return s;
}

DatasetSplit parse_tsv(std::istream& in, const std::string& split_name) {
  DatasetSplit split;
  split.name = split_name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto error = [&](const std::string& what) {
      return ParseError(split_name + " line " + std::to_string(line_no) + ": " + what);
    };
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw error("expected 3 tab-separated columns");
    }
    const std::string label = line.substr(t2 + 1);
    if (label != "0" && label != "1") throw error("invalid label '" + label + "'");
    Example e;
    e.pair_id = split_name + "-" + std::to_string(line_no);
    e.premise = line.substr(0, t1);
    e.hypothesis = line.substr(t1 + 1, t2 - t1 - 1);
    if (e.premise.empty() || e.hypothesis.empty()) throw error("empty premise or hypothesis");
    e.label = label == "1" ? 1 : 0;
    split.examples.push_back(std::move(e));
  }
  if (split.examples.empty()) throw DataError("split '" + split_name + "' is empty");
  split.refresh_stats();
  return split;
}

DatasetSplit load_tsv(const std::filesystem::path& path, const std::string& split_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return parse_tsv(in, split_name);
}

void write_tsv(const DatasetSplit& split, std::ostream& out) {
  for (const auto& e : split.examples) {
    out << e.premise << '\t' << e.hypothesis << '\t' << e.label << '\n';
  }
}

void save_tsv(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_tsv(split, out);
}

}  // namespace contpat
