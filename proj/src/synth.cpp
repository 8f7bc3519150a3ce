#include "contpat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "contpat/embedded_data.hpp"

namespace contpat {

using nlohmann::json;

NamePool NamePool::from_json_text(std::string_view text) {
  NamePool pool;
  try {
    const json j = json::parse(text);
    for (const auto& [type, list] : j.items()) {
      pool.names[type] = list.get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("name pool: ") + e.what());
  }
  pool.validate();
  return pool;
}

std::string NamePool::to_json_text() const { return json(names).dump(1); }

void NamePool::validate() const {
  for (const auto& [type, list] : names) {
    if (list.size() < 2) throw DataError("name pool type '" + type + "' needs at least 2 names");
  }
}

const NamePool& default_name_pool() {
  static const NamePool pool = NamePool::from_json_text(embedded::kNamePoolJson);
  return pool;
}

namespace {

struct Binding {
  std::string type;
  std::string name;
};

class Binder {
 public:
  Binder(Rng& rng, const NamePool& pool) : rng_(rng), pool_(pool) {}

  std::string apply(std::string_view text) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == '{' && i + 3 < text.size() && (text[i + 1] == 'A' || text[i + 1] == 'B') &&
          text[i + 2] == ':') {
        const auto close = text.find('}', i + 3);
        if (close != std::string_view::npos && close > i + 3) {
          out += bind(text[i + 1], std::string(text.substr(i + 3, close - i - 3)));
          i = close + 1;
          continue;
        }
      }
      out.push_back(text[i++]);
    }
    return out;
  }

 private:
  const std::string& bind(char slot, const std::string& type) {
    auto it = bound_.find(slot);
    if (it != bound_.end()) {
      if (it->second.type != type) {
        throw DataError(std::string("placeholder ") + slot + " used with types '" +
                        it->second.type + "' and '" + type + "'");
      }
      return it->second.name;
    }
    auto list = pool_.names.find(type);
    if (list == pool_.names.end()) {
      throw DataError("cannot instantiate placeholder of unknown type '" + type + "'");
    }
    const auto other = bound_.find(slot == 'A' ? 'B' : 'A');
    std::uniform_int_distribution<std::size_t> pick(0, list->second.size() - 1);
    std::string name;
    do {
      name = list->second[pick(rng_)];
    } while (other != bound_.end() && other->second.name == name);
    return bound_.emplace(slot, Binding{type, std::move(name)}).first->second.name;
  }

  Rng& rng_;
  const NamePool& pool_;
  std::map<char, Binding> bound_;
};

std::vector<PredicatePair> pairs_from_json(const json& j, const char* key) {
  std::vector<PredicatePair> out;
  if (!j.contains(key)) return out;
  for (const auto& p : j.at(key)) {
    if (!p.is_array() || p.size() != 2) {
      throw FormatError(std::string("rule table: entries of '") + key + "' must be pairs");
    }
    out.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
  }
  return out;
}

json pairs_to_json(const std::vector<PredicatePair>& pairs) {
  json out = json::array();
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

std::size_t round_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

struct PairSplit {
  std::vector<PredicatePair> train, dev, test;
};

PairSplit split_pairs(std::vector<PredicatePair> pairs, const SynthOptions& options,
                      const char* label, Rng& rng) {
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const std::size_t n_train = round_count(pairs.size(), options.train_fraction);
  const std::size_t n_dev = round_count(pairs.size(), options.dev_fraction);
  if (n_train == 0 || n_dev == 0 || n_train + n_dev >= pairs.size()) {
    throw DataError(std::string("rule table too small: ") + std::to_string(pairs.size()) + " " +
                    label + " pairs cannot cover disjoint train/dev/test splits");
  }
  PairSplit s;
  s.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.dev.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
               pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  s.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), pairs.end());
  return s;
}

DatasetSplit generate_split(const std::string& name, std::size_t size,
                            const std::vector<PredicatePair>& positives,
                            const std::vector<PredicatePair>& negatives, double negative_rate,
                            const NamePool& pool, Rng& rng) {
  static const char* const kObjectTypes[] = {"org", "location", "person"};
  const std::size_t n_neg = round_count(size, negative_rate);
  DatasetSplit split;
  split.name = name;
  std::uniform_int_distribution<std::size_t> object_type(0, 2);
  for (std::size_t i = 0; i < size; ++i) {
    const bool negative = i < n_neg;
    const auto& [p, h] = negative ? negatives[i % negatives.size()]
                                  : positives[(i - n_neg) % positives.size()];
    const std::string b = std::string("{B:") + kObjectTypes[object_type(rng)] + "}";
    auto [premise, hypothesis] =
        instantiate_pair("{A:person} " + p + " " + b, "{A:person} " + h + " " + b, rng, pool);
    Example e;
    e.premise = std::move(premise);
    e.hypothesis = std::move(hypothesis);
    e.label = negative ? 0 : 1;
    split.examples.push_back(std::move(e));
  }
  std::shuffle(split.examples.begin(), split.examples.end(), rng);
  for (std::size_t i = 0; i < split.examples.size(); ++i) {
    split.examples[i].pair_id = name + "-" + std::to_string(i + 1);
  }
  split.refresh_stats();
  return split;
}

}  // namespace

std::string instantiate_placeholders(std::string_view text, Rng& rng, const NamePool& pool) {
  return Binder(rng, pool).apply(text);
}

std::pair<std::string, std::string> instantiate_pair(std::string_view premise,
                                                     std::string_view hypothesis, Rng& rng,
                                                     const NamePool& pool) {
  Binder binder(rng, pool);
  std::string p = binder.apply(premise);
  return {std::move(p), binder.apply(hypothesis)};
}

RuleTable RuleTable::from_json_text(std::string_view text) {
  try {
    const json j = json::parse(text);
    return {pairs_from_json(j, "entailing"), pairs_from_json(j, "non_entailing")};
  } catch (const json::exception& e) {
    throw FormatError(std::string("rule table: ") + e.what());
  }
}

std::string RuleTable::to_json_text() const {
  return json{{"entailing", pairs_to_json(entailing)},
              {"non_entailing", pairs_to_json(non_entailing)}}
      .dump(1);
}

const RuleTable& default_rule_table() {
  static const RuleTable table = RuleTable::from_json_text(embedded::kRulesDefaultJson);
  return table;
}

std::pair<RuleTable, RuleTable> partition_rule_table(const RuleTable& table, double fraction,
                                                     Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ParameterError("partition fraction must lie in (0, 1)");
  }
  RuleTable first, second;
  auto divide = [&](std::vector<PredicatePair> pairs, std::vector<PredicatePair>& a,
                    std::vector<PredicatePair>& b) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const std::size_t cut = round_count(pairs.size(), fraction);
    a.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(cut));
    b.assign(pairs.begin() + static_cast<std::ptrdiff_t>(cut), pairs.end());
  };
  divide(table.entailing, first.entailing, second.entailing);
  divide(table.non_entailing, first.non_entailing, second.non_entailing);
  return {std::move(first), std::move(second)};
}

SynthDataset synthesize_toy_dataset(Rng& rng, const RuleTable& rules, const NamePool& pool,
                                    const SynthOptions& options) {
  if (options.size < 30) throw DataError("toy dataset size must be at least 30");
  if (!(options.negative_rate >= 0.0 && options.negative_rate <= 1.0)) {
    throw DataError("negative rate must lie in [0, 1]");
  }
  pool.validate();
  const PairSplit pos = split_pairs(rules.entailing, options, "entailing", rng);
  const PairSplit neg = split_pairs(rules.non_entailing, options, "non-entailing", rng);

  const std::size_t n_train = round_count(options.size, options.train_fraction);
  const std::size_t n_dev = round_count(options.size, options.dev_fraction);
  const std::size_t n_test = options.size - n_train - n_dev;
  SynthDataset out;
  out.train = generate_split("train", n_train, pos.train, neg.train, options.negative_rate, pool, rng);
  out.dev = generate_split("dev", n_dev, pos.dev, neg.dev, options.negative_rate, pool, rng);
  out.test = generate_split("test", n_test, pos.test, neg.test, options.negative_rate, pool, rng);
  return out;
}

}  // namespace contpat
