#include "contpat/run_config.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "contpat/checkpoint.hpp"
#include "contpat/tokenizer.hpp"
#include "contpat/vocab.hpp"

namespace contpat {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

// Counts of non-negative quantities must be integers >= 0.
void read_count(const json& obj, const char* key, const std::string& where, std::size_t& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  out = it->get<std::size_t>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

}  // namespace

void RunConfig::validate() const {
  if (pattern.family == PatternFamily::discrete) {
    if (pattern.discrete_texts.empty()) {
      throw ConfigError("pattern.discrete_texts must list at least one pattern");
    }
    for (const auto& t : pattern.discrete_texts) {
      if (split_words(t, data.lowercase).empty()) {
        throw ConfigError("discrete pattern text '" + t + "' has no tokens");
      }
    }
  } else {
    if (pattern.n == 0) throw ConfigError("pattern.n must be at least 1");
    if (!pattern.discrete_texts.empty()) {
      throw ConfigError("pattern.discrete_texts is only valid for the discrete family");
    }
  }
  {
    EncoderConfig shape = encoder;
    shape.vocab_size = kReservedCount + 1;  // the real size is known only after tokenization
    shape.validate();
  }
  if (data.max_vocab <= kReservedCount) throw ConfigError("data.max_vocab must exceed 4");
  const std::size_t n = pattern.family == PatternFamily::discrete ? pattern.discrete_texts.size() : pattern.n;
  if (train.pattern_batch > n) {
    throw ConfigError("train.pattern_batch " + std::to_string(train.pattern_batch) +
                      " exceeds the number of patterns " + std::to_string(n));
  }
  train.validate();
}

void RunConfig::validate_inputs() const {
  validate();
  if (data.train.empty()) throw ConfigError("data.train is required");
  if (data.dev.empty()) throw ConfigError("data.dev is required");
  for (const auto* p : {&data.train, &data.dev}) {
    if (!std::filesystem::is_regular_file(*p)) throw ConfigError("dataset file not found: " + p->string());
  }
  if (data.test && !std::filesystem::is_regular_file(*data.test)) {
    throw ConfigError("dataset file not found: " + data.test->string());
  }
}

std::string RunConfig::canonical_json() const {
  json j;
  j["preset"] = preset;
  j["seed"] = seed;
  j["pattern"] = {{"family", std::string(to_string(pattern.family))},
                  {"n", pattern.n},
                  {"k", pattern.k},
                  {"discrete_texts", pattern.discrete_texts}};
  j["encoder"] = {{"d_model", encoder.d_model}, {"n_layers", encoder.n_layers},
                  {"n_heads", encoder.n_heads}, {"d_ff", encoder.d_ff},
                  {"max_len", encoder.max_len}, {"dropout", encoder.internal_dropout}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"pattern_batch", train.pattern_batch},
                {"accumulation", train.accumulation},
                {"learning_rate", train.learning_rate},
                {"weight_decay", train.weight_decay},
                {"head_dropout", train.head_dropout}};
  j["data"] = {{"train", data.train.string()},
               {"dev", data.dev.string()},
               {"test", data.test ? json(data.test->string()) : json(nullptr)},
               {"max_vocab", data.max_vocab},
               {"lowercase", data.lowercase}};
  return j.dump();
}

std::string RunConfig::run_id() const { return content_hash(canonical_json()); }

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config", {"preset", "seed", "pattern", "encoder", "train", "data", "output_dir"});

  RunConfig c;
  read(root, "preset", "config", c.preset);
  c.train = train_preset(c.preset);
  read(root, "seed", "config", c.seed);

  bool pattern_batch_given = false;
  if (auto it = root.find("pattern"); it != root.end()) {
    check_keys(*it, "pattern", {"family", "n", "k", "discrete_texts"});
    std::string family = "beta";
    read(*it, "family", "pattern", family);
    c.pattern.family = parse_family(family);
    read_count(*it, "n", "pattern", c.pattern.n);
    read_count(*it, "k", "pattern", c.pattern.k);
    read(*it, "discrete_texts", "pattern", c.pattern.discrete_texts);
  }
  if (c.pattern.family == PatternFamily::discrete) {
    c.pattern.n = c.pattern.discrete_texts.size();
    c.pattern.k = 0;
  }
  if (auto it = root.find("encoder"); it != root.end()) {
    check_keys(*it, "encoder", {"d_model", "n_layers", "n_heads", "d_ff", "max_len", "dropout"});
    read_count(*it, "d_model", "encoder", c.encoder.d_model);
    read_count(*it, "n_layers", "encoder", c.encoder.n_layers);
    read_count(*it, "n_heads", "encoder", c.encoder.n_heads);
    read_count(*it, "d_ff", "encoder", c.encoder.d_ff);
    read_count(*it, "max_len", "encoder", c.encoder.max_len);
    read(*it, "dropout", "encoder", c.encoder.internal_dropout);
  }
  if (auto it = root.find("train"); it != root.end()) {
    check_keys(*it, "train", {"epochs", "batch_size", "pattern_batch", "accumulation",
                              "learning_rate", "weight_decay", "head_dropout"});
    read_count(*it, "epochs", "train", c.train.epochs);
    read_count(*it, "batch_size", "train", c.train.batch_size);
    pattern_batch_given = it->contains("pattern_batch");
    read_count(*it, "pattern_batch", "train", c.train.pattern_batch);
    read_count(*it, "accumulation", "train", c.train.accumulation);
    read(*it, "learning_rate", "train", c.train.learning_rate);
    read(*it, "weight_decay", "train", c.train.weight_decay);
    read(*it, "head_dropout", "train", c.train.head_dropout);
  }
  if (!pattern_batch_given) {
    c.train.pattern_batch = std::max<std::size_t>(1, std::min(c.train.pattern_batch, c.pattern.n));
  }
  c.train.seed = c.seed;

  auto data = root.find("data");
  if (data == root.end()) throw ConfigError("config.data is required");
  check_keys(*data, "data", {"train", "dev", "test", "max_vocab", "lowercase"});
  std::string path;
  if (!data->contains("train") || !data->contains("dev")) {
    throw ConfigError("config.data needs both 'train' and 'dev'");
  }
  read(*data, "train", "data", path);
  c.data.train = resolve(base_dir, path);
  read(*data, "dev", "data", path);
  c.data.dev = resolve(base_dir, path);
  if (data->contains("test") && !data->at("test").is_null()) {
    read(*data, "test", "data", path);
    c.data.test = resolve(base_dir, path);
  }
  read_count(*data, "max_vocab", "data", c.data.max_vocab);
  read(*data, "lowercase", "data", c.data.lowercase);

  std::string out = "runs";
  read(root, "output_dir", "config", out);
  c.output_dir = resolve(base_dir, out);

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config " + path.string());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  return parse_run_config(text, base);
}

}  // namespace contpat
