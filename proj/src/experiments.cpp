#include "contpat/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <thread>
#include <tuple>

#include <json.hpp>

namespace contpat {
namespace {

using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kInitPurpose = 0x1417;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<int> labels_of(std::span<const Example> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

std::size_t continuous_tokens(const Model& model) {
  std::size_t n = 0;
  for (const auto& p : model.patterns) {
    if (p.family != PatternFamily::discrete) n += p.k();
  }
  return n;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config, DatasetSplit train, DatasetSplit dev,
                          std::optional<DatasetSplit> test) {
  std::vector<std::string> corpus;
  corpus.reserve(2 * (train.examples.size() + dev.examples.size()));
  for (const auto* split : {&train, &dev}) {
    for (const auto& e : split->examples) {
      corpus.push_back(e.premise);
      corpus.push_back(e.hypothesis);
    }
  }
  for (const auto& t : config.pattern.discrete_texts) corpus.push_back(t);
  PreparedData out;
  out.tokenizer = Tokenizer::build(corpus, config.data.max_vocab, config.data.lowercase);
  tokenize_split(train, out.tokenizer);
  tokenize_split(dev, out.tokenizer);
  if (test) tokenize_split(*test, out.tokenizer);
  out.train = std::move(train);
  out.dev = std::move(dev);
  out.test = std::move(test);
  return out;
}

PreparedData load_data(const RunConfig& config) {
  std::optional<DatasetSplit> test;
  if (config.data.test) test = load_tsv(*config.data.test, "test");
  return prepare_data(config, load_tsv(config.data.train, "train"), load_tsv(config.data.dev, "dev"),
                      std::move(test));
}

std::vector<PatternSpec> make_patterns(const RunConfig& config, const Tokenizer& tokenizer,
                                       std::size_t& vocab_size) {
  if (config.pattern.family == PatternFamily::discrete) {
    std::vector<PatternSpec> out;
    for (const auto& text : config.pattern.discrete_texts) {
      out.push_back({PatternFamily::discrete, tokenizer.encode(text)});
    }
    vocab_size = tokenizer.size();
    return out;
  }
  auto ext = extend_vocabulary(tokenizer.size(), config.pattern.n, config.pattern.k);
  vocab_size = ext.extended_size();
  return ext.patterns(config.pattern.family);
}

TrainedRun run_training(const RunConfig& config, const PreparedData& data,
                        const TrainOptions& options) {
  config.validate();
  std::size_t vocab_size = 0;
  auto patterns = make_patterns(config, data.tokenizer, vocab_size);
  EncoderConfig ec = config.encoder;
  ec.vocab_size = vocab_size;

  TrainedRun run;
  run.checkpoint.config_json = config.canonical_json();
  run.checkpoint.tokenizer = data.tokenizer;
  run.checkpoint.model = make_model(ec, data.tokenizer.size(), std::move(patterns),
                                    derive_seed(config.seed, kInitPurpose));
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  run.history = train(run.checkpoint.model, data.train.examples, data.dev.examples, tc, options);

  const auto scores = score_values(run.checkpoint.model, data.dev.examples);
  const auto labels = labels_of(data.dev.examples);
  run.theta = tune_threshold(scores, labels).threshold;
  run.dev_report = classification_report(scores, labels, run.theta);
  run.checkpoint.theta = run.theta;
  return run;
}

TrainOutput cmd_train(const RunConfig& config) {
  config.validate_inputs();
  const PreparedData data = load_data(config);
  TrainOutput out;
  out.run = run_training(config, data);

  const std::string id = config.run_id();
  out.run_dir = config.output_dir / id;
  const auto staging = config.output_dir / ("." + id + ".partial");
  const std::string checkpoint_bytes = serialize_checkpoint(out.run.checkpoint);
  out.checkpoint_hash = content_hash(checkpoint_bytes);
  try {
    std::filesystem::remove_all(staging);
    std::filesystem::create_directories(staging);
    write_file_atomic(staging / "checkpoint.bin", checkpoint_bytes);
    write_file_atomic(staging / "history.jsonl", history_jsonl(out.run.history));
    write_file_atomic(staging / "dev_report.json", report_json(out.run.dev_report));
    write_file_atomic(staging / "dev_curve.csv", curve_csv(out.run.dev_report));
    write_file_atomic(staging / "theta.txt", format_double(out.run.theta) + "\n");
    write_file_atomic(staging / "config.json",
                      nlohmann::json::parse(config.canonical_json()).dump(2) + "\n");
    std::filesystem::remove_all(out.run_dir);
    std::filesystem::rename(staging, out.run_dir);
  } catch (...) {
    std::error_code ignored;
    std::filesystem::remove_all(staging, ignored);
    throw;
  }
  return out;
}

ParameterSummary parameter_summary(std::size_t n, std::size_t k, std::size_t d,
                                   std::size_t base_parameters) {
  ParameterSummary s;
  s.added = n * k * d;
  s.base = base_parameters;
  s.total = base_parameters + s.added;
  s.added_fraction = base_parameters ? static_cast<double>(s.added) / static_cast<double>(base_parameters) : 0.0;
  return s;
}

ParameterSummary parameter_summary(const Model& model) {
  const std::size_t added = continuous_tokens(model) * model.config.d_model;
  const std::size_t total = model.parameter_count();
  ParameterSummary s;
  s.total = total;
  s.added = added;
  s.base = total - added;
  s.added_fraction = s.base ? static_cast<double>(added) / static_cast<double>(s.base) : 0.0;
  return s;
}

ThetaSource ThetaSource::parse(const std::string& text) {
  if (text == "dev") return {Kind::dev, 0.0};
  if (text == "zero") return {Kind::zero, 0.0};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError("--theta must be 'dev', 'zero' or a number, got '" + text + "'");
  }
  return {Kind::value, v};
}

EvalOutput evaluate_checkpoint(const Checkpoint& checkpoint, DatasetSplit split, double theta) {
  tokenize_split(split, checkpoint.tokenizer);
  EvalOutput out;
  out.scores = score_values(checkpoint.model, split.examples);
  out.report = classification_report(out.scores, labels_of(split.examples), theta);
  out.parameters = parameter_summary(checkpoint.model);
  out.split = std::move(split);
  return out;
}

EvalOutput cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& test_tsv,
                    const ThetaSource& theta) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  double t = 0.0;
  switch (theta.kind) {
    case ThetaSource::Kind::dev:
      if (!ck.theta) throw ConfigError("checkpoint " + checkpoint.string() + " stores no tuned threshold");
      t = *ck.theta;
      break;
    case ThetaSource::Kind::zero: t = 0.0; break;
    case ThetaSource::Kind::value: t = theta.value; break;
  }
  return evaluate_checkpoint(ck, load_tsv(test_tsv, "test"), t);
}

EvalOutput cmd_transfer(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& target_tsv) {
  return evaluate_checkpoint(load_checkpoint(checkpoint), load_tsv(target_tsv, "test"), 0.0);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

EmbeddingAnalysis analyze_embeddings(const Checkpoint& checkpoint, std::size_t top) {
  const Model& m = checkpoint.model;
  const std::size_t d = m.config.d_model;
  const auto& table = m.encoder.token_embeddings;
  const auto row = [&](TokenId id) { return table.values().subspan(std::size_t{id} * d, d); };

  EmbeddingAnalysis out;
  for (std::size_t p = 0; p < m.patterns.size(); ++p) {
    if (m.patterns[p].family == PatternFamily::discrete) continue;
    for (std::size_t i = 0; i < m.patterns[p].k(); ++i) {
      out.tokens.push_back({m.patterns[p].tokens[i], p, i, {}, 0.0, 0.0});
    }
  }
  if (out.tokens.empty()) throw ConfigError("checkpoint has no continuous pattern tokens to analyze");
  if (m.base_vocab == 0) throw ConfigError("checkpoint has an empty word vocabulary");

  bool first_vocab = true, first_pattern = true;
  for (auto& t : out.tokens) {
    std::vector<Neighbor> all;
    all.reserve(m.base_vocab);
    for (TokenId v = 0; v < m.base_vocab; ++v) {
      all.push_back({v, checkpoint.tokenizer.token(v), cosine(row(t.id), row(v))});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const Neighbor& a, const Neighbor& b) { return a.cosine > b.cosine; });
    t.max_vocab_cosine = all.front().cosine;
    all.resize(std::min(top, all.size()));
    t.nearest = std::move(all);

    bool any = false;
    for (const auto& other : out.tokens) {
      if (other.id == t.id) continue;
      const double c = cosine(row(t.id), row(other.id));
      t.max_pattern_cosine = any ? std::max(t.max_pattern_cosine, c) : c;
      any = true;
    }
    out.max_vocab_cosine = first_vocab ? t.max_vocab_cosine : std::max(out.max_vocab_cosine, t.max_vocab_cosine);
    first_vocab = false;
    if (any) {
      out.max_pattern_cosine = first_pattern ? t.max_pattern_cosine
                                             : std::max(out.max_pattern_cosine, t.max_pattern_cosine);
      first_pattern = false;
    }
  }
  return out;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const PreparedData& data,
                                const SweepSpec& spec) {
  if (spec.n_list.empty() || spec.k_list.empty() || spec.families.empty()) {
    throw ConfigError("sweep grids must be nonempty");
  }
  for (auto f : spec.families) {
    if (f == PatternFamily::discrete) throw ConfigError("the discrete family has no n x k grid to sweep");
  }
  const bool both = std::count(spec.families.begin(), spec.families.end(), PatternFamily::alpha) &&
                    std::count(spec.families.begin(), spec.families.end(), PatternFamily::beta);

  using Key = std::tuple<PatternFamily, std::size_t, std::size_t>;
  std::vector<Key> runs;
  std::map<Key, std::size_t> index;
  std::vector<SweepRow> rows;
  std::vector<std::size_t> row_run;
  for (auto f : spec.families) {
    for (auto n : spec.n_list) {
      for (auto k : spec.k_list) {
        // Templates coincide for k <= 2, so one beta run serves both families.
        const Key key{k <= 2 ? PatternFamily::beta : f, n, k};
        auto [it, fresh] = index.emplace(key, runs.size());
        if (fresh) runs.push_back(key);
        rows.push_back({f, n, k, std::nullopt, k <= 2 && both, {}});
        row_run.push_back(it->second);
      }
    }
  }

  std::vector<std::optional<double>> results(runs.size());
  std::vector<std::string> errors(runs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        RunConfig cell = base;
        cell.pattern = {std::get<0>(runs[i]), std::get<1>(runs[i]), std::get<2>(runs[i]), {}};
        if (cell.pattern.n == 0) throw ConfigError("pattern.n must be at least 1");
        cell.train.pattern_batch = std::min(cell.train.pattern_batch, cell.pattern.n);
        TrainOptions options;
        options.evaluate_dev = false;
        std::size_t vocab_size = 0;
        auto patterns = make_patterns(cell, data.tokenizer, vocab_size);
        EncoderConfig ec = cell.encoder;
        ec.vocab_size = vocab_size;
        Model model = make_model(ec, data.tokenizer.size(), std::move(patterns),
                                 derive_seed(cell.seed, kInitPurpose));
        TrainConfig tc = cell.train;
        tc.seed = cell.seed;
        train(model, data.train.examples, data.dev.examples, tc, options);
        const auto scores = score_values(model, data.dev.examples);
        results[i] = auc_percent(auc_p50(pr_curve(scores, labels_of(data.dev.examples))));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(spec.jobs, 1, std::max<std::size_t>(1, runs.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].dev_auc_percent = results[row_run[r]];
    rows[r].error = errors[row_run[r]];
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "family,n,k,dev_auc_percent,shared\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.family)) + "," + std::to_string(r.n) + "," + std::to_string(r.k) + "," +
           (r.dev_auc_percent ? format_double(*r.dev_auc_percent) : std::string()) + "," +
           (r.shared ? "true" : "false") + "\n";
  }
  return out;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const SweepSpec& spec,
                                const std::filesystem::path& out_dir) {
  base.validate_inputs();
  const PreparedData data = load_data(base);
  auto rows = run_sweep(base, data, spec);
  std::filesystem::create_directories(out_dir);
  const auto err_dir = out_dir / "sweep_errors";
  std::filesystem::remove_all(err_dir);
  for (const auto& r : rows) {
    if (r.error.empty()) continue;
    std::filesystem::create_directories(err_dir);
    const std::string name = std::string(to_string(r.family)) + "_n" + std::to_string(r.n) + "_k" +
                             std::to_string(r.k) + ".txt";
    write_file_atomic(err_dir / name, r.error + "\n");
  }
  write_file_atomic(out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

SynthDataset synthesize(const SynthRequest& request) {
  RuleTable rules = request.rules ? RuleTable::from_json_text(read_file(*request.rules))
                                  : default_rule_table();
  if (request.half != SynthRequest::Half::all) {
    Rng part(request.rule_seed);
    auto [first, second] = partition_rule_table(rules, request.rule_fraction, part);
    rules = request.half == SynthRequest::Half::first ? std::move(first) : std::move(second);
  }
  Rng rng(request.seed);
  return synthesize_toy_dataset(rng, rules, default_name_pool(), request.options);
}

void cmd_synth(const SynthRequest& request, const std::filesystem::path& out_dir) {
  const auto ds = synthesize(request);
  std::filesystem::create_directories(out_dir);
  save_tsv(ds.train, out_dir / "train.tsv");
  save_tsv(ds.dev, out_dir / "dev.tsv");
  save_tsv(ds.test, out_dir / "test.tsv");
}

std::string report_json(const EvalReport& report, const std::optional<ParameterSummary>& parameters) {
  ojson j;
  j["auc"] = report.auc;
  j["auc_percent"] = report.auc_percent;
  j["threshold"] = report.threshold;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  const auto& c = report.confusion;
  j["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
  ojson curve = ojson::array();
  for (const auto& p : report.curve) {
    curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall},
                     {"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}, {"tn", p.tn}});
  }
  j["curve"] = std::move(curve);
  if (parameters) {
    j["parameters"] = {{"total", parameters->total},
                       {"base", parameters->base},
                       {"added", parameters->added},
                       {"added_fraction", parameters->added_fraction}};
  }
  return j.dump(2) + "\n";
}

std::string curve_csv(const EvalReport& report) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : report.curve) {
    out += format_double(p.threshold) + "," + format_double(p.precision) + "," + format_double(p.recall) + "\n";
  }
  return out;
}

std::string history_jsonl(const TrainHistory& history) {
  std::string out;
  std::size_t step = 0;
  for (const auto& e : history.epochs) {
    for (; step < e.steps && step < history.step_losses.size(); ++step) {
      out += ojson{{"step", step + 1}, {"loss", history.step_losses[step]}}.dump() + "\n";
    }
    out += ojson{{"epoch", e.epoch}, {"dev_auc", e.dev_auc}}.dump() + "\n";
  }
  for (; step < history.step_losses.size(); ++step) {
    out += ojson{{"step", step + 1}, {"loss", history.step_losses[step]}}.dump() + "\n";
  }
  return out;
}

std::string analysis_json(const EmbeddingAnalysis& analysis) {
  ojson j;
  j["max_vocab_cosine"] = analysis.max_vocab_cosine;
  j["max_pattern_cosine"] = analysis.max_pattern_cosine;
  ojson tokens = ojson::array();
  for (const auto& t : analysis.tokens) {
    ojson nearest = ojson::array();
    for (const auto& nb : t.nearest) {
      nearest.push_back({{"id", nb.id}, {"token", nb.token}, {"cosine", nb.cosine}});
    }
    tokens.push_back({{"id", t.id},
                      {"pattern", t.pattern},
                      {"position", t.position},
                      {"nearest", std::move(nearest)},
                      {"max_vocab_cosine", t.max_vocab_cosine},
                      {"max_pattern_cosine", t.max_pattern_cosine}});
  }
  j["tokens"] = std::move(tokens);
  return j.dump(2) + "\n";
}

std::string score_file(std::span<const Example> examples, std::span<const double> scores) {
  if (examples.size() != scores.size()) throw DimensionError("score_file: length mismatch");
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out += examples[i].pair_id + "\t" + format_double(scores[i]) + "\t" + std::to_string(examples[i].label) + "\n";
  }
  return out;
}

}  // namespace contpat
