#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "contpat/experiments.hpp"

namespace fs = std::filesystem;
using namespace contpat;

namespace {

std::vector<PatternFamily> parse_families(const std::vector<std::string>& names) {
  std::vector<PatternFamily> out;
  for (const auto& n : names) out.push_back(parse_family(n));
  return out;
}

void emit(const std::optional<fs::path>& out_dir, const std::string& name, const std::string& text) {
  if (!out_dir) {
    std::cout << text;
    return;
  }
  fs::create_directories(*out_dir);
  write_file_atomic(*out_dir / name, text);
}

void write_eval(const EvalOutput& result, const std::optional<fs::path>& out_dir, const std::string& stem) {
  emit(out_dir, stem + "_report.json", report_json(result.report, result.parameters));
  if (out_dir) {
    write_file_atomic(*out_dir / (stem + "_curve.csv"), curve_csv(result.report));
    write_file_atomic(*out_dir / (stem + "_scores.tsv"), score_file(result.split.examples, result.scores));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous pattern tokens for sentence-pair entailment: training and evaluation"};
  app.require_subcommand(1);

  fs::path config_path, checkpoint, test_tsv;
  std::optional<fs::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::string theta = "dev";
  std::vector<std::size_t> n_list, k_list;
  std::vector<std::string> families{"alpha", "beta"};
  std::size_t jobs = 1, top = 5;

  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config_path, "run config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "output root (overrides output_dir)");
  train->add_option("--seed", seed, "override the config seed");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled TSV");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--test", test_tsv, "test TSV")->required();
  eval->add_option("--theta", theta, "dev | zero | VALUE")->capture_default_str();
  eval->add_option("--out", out_dir, "directory for report, curve and scores (default: print report)");

  auto* sweep = app.add_subcommand("sweep", "train one model per (family, n, k) cell");
  sweep->add_option("--config", config_path, "base run config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--n-list", n_list, "pattern counts")->required()->delimiter(',');
  sweep->add_option("--k-list", k_list, "pattern lengths")->required()->delimiter(',');
  sweep->add_option("--families", families, "alpha,beta")->delimiter(',')->capture_default_str();
  sweep->add_option("--jobs", jobs, "parallel cells")->capture_default_str();
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--out", out_dir, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "nearest neighbours of the pattern token embeddings");
  analyze->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  analyze->add_option("--top", top, "neighbours per token")->capture_default_str();
  analyze->add_option("--out", out_dir, "directory for analysis.json (default: print)");

  auto* transfer = app.add_subcommand("transfer", "evaluate on a foreign test set at threshold 0");
  transfer->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  transfer->add_option("--test", test_tsv, "target test TSV")->required();
  transfer->add_option("--out", out_dir, "directory for report, curve and scores (default: print report)");

  SynthRequest synth_req;
  std::string half = "all", rules;
  auto* synth = app.add_subcommand("synth", "generate the synthetic entailment dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--size", synth_req.options.size, "total examples")->capture_default_str();
  synth->add_option("--negative-rate", synth_req.options.negative_rate, "fraction of negatives")
      ->capture_default_str();
  synth->add_option("--rules", rules, "rule table JSON (default: shipped table)");
  synth->add_option("--rule-half", half, "all | first | second half of a random rule partition")
      ->check(CLI::IsMember({"all", "first", "second"}))
      ->capture_default_str();
  synth->add_option("--rule-seed", synth_req.rule_seed, "seed of the rule partition")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      RunConfig config = load_run_config(config_path);
      if (seed) config.seed = config.train.seed = *seed;
      if (out_dir) config.output_dir = *out_dir;
      const auto result = cmd_train(config);
      std::printf("run_dir %s\ncheckpoint_hash %s\ndev_auc_percent %.4f\ntheta %.17g\n",
                  result.run_dir.string().c_str(), result.checkpoint_hash.c_str(),
                  result.run.dev_report.auc_percent, result.run.theta);
    } else if (*eval) {
      write_eval(cmd_eval(checkpoint, test_tsv, ThetaSource::parse(theta)), out_dir, "eval");
    } else if (*sweep) {
      RunConfig config = load_run_config(config_path);
      if (seed) config.seed = config.train.seed = *seed;
      SweepSpec spec{n_list, k_list, parse_families(families), jobs};
      const auto rows = cmd_sweep(config, spec, *out_dir);
      std::cout << sweep_csv(rows);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
      if (failed) std::cerr << failed << " cell(s) failed; see " << (*out_dir / "sweep_errors").string() << "\n";
    } else if (*analyze) {
      emit(out_dir, "analysis.json", analysis_json(analyze_embeddings(load_checkpoint(checkpoint), top)));
    } else if (*transfer) {
      write_eval(cmd_transfer(checkpoint, test_tsv), out_dir, "transfer");
    } else if (*synth) {
      if (seed) synth_req.seed = *seed;
      if (!rules.empty()) synth_req.rules = rules;
      synth_req.half = half == "first"    ? SynthRequest::Half::first
                       : half == "second" ? SynthRequest::Half::second
                                          : SynthRequest::Half::all;
      cmd_synth(synth_req, *out_dir);
      std::printf("wrote %s/{train,dev,test}.tsv\n", out_dir->string().c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
