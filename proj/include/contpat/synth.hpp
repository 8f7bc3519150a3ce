#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "contpat/common.hpp"
#include "contpat/data.hpp"

namespace contpat {

// Typed entity names standing in for linked knowledge-base entities.
struct NamePool {
  std::map<std::string, std::vector<std::string>> names;

  static NamePool from_json_text(std::string_view text);
  std::string to_json_text() const;
  void validate() const;  // >= 2 names per type
};

// The pool shipped in data/name_pool.json (person/org/location).
const NamePool& default_name_pool();

// Replaces every {A:type} / {B:type} placeholder with a name of that type.
// A and B always receive different names; repeated placeholders reuse the
// same name. Unknown types throw DataError.
std::string instantiate_placeholders(std::string_view text, Rng& rng, const NamePool& pool);

// Instantiates premise and hypothesis with one shared binding.
std::pair<std::string, std::string> instantiate_pair(std::string_view premise,
                                                     std::string_view hypothesis, Rng& rng,
                                                     const NamePool& pool);

using PredicatePair = std::pair<std::string, std::string>;

struct RuleTable {
  std::vector<PredicatePair> entailing;
  std::vector<PredicatePair> non_entailing;

  static RuleTable from_json_text(std::string_view text);
  std::string to_json_text() const;
};

// The table shipped in data/rules_default.json. Dropping a veridical
// modifier entails ("secretly buy" -> "buy"); dropping a non-veridical one,
// adding or swapping a modifier does not. Four verb chains ordered specific
// to general add earlier-to-later (entailing) and reversed pairs.
const RuleTable& default_rule_table();

// Randomly splits each label class of `table` into two disjoint tables,
// the first receiving `fraction` of the pairs.
std::pair<RuleTable, RuleTable> partition_rule_table(const RuleTable& table, double fraction,
                                                     Rng& rng);

struct SynthOptions {
  std::size_t size = 1000;
  double negative_rate = 0.67;
  double train_fraction = 0.7;
  double dev_fraction = 0.1;
};

inline constexpr double kSherliicNegativeRate = 0.67;
inline constexpr double kLevyHoltNegativeRate = 0.81;

struct SynthDataset {
  DatasetSplit train, dev, test;
};

// Subject-predicate-object sentence pairs sharing their arguments and
// differing in the predicate, labeled by the rule table. Predicate pairs are
// partitioned across train/dev/test so no pair appears in two splits.
SynthDataset synthesize_toy_dataset(Rng& rng, const RuleTable& rules, const NamePool& pool,
                                    const SynthOptions& options = {});

}  // namespace contpat
