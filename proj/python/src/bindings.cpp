#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "contpat/experiments.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace contpat;

namespace {

RunConfig config_from(const fs::path& path, std::optional<std::uint64_t> seed,
                      std::optional<fs::path> out_dir) {
  RunConfig c = load_run_config(path);
  if (seed) c.seed = c.train.seed = *seed;
  if (out_dir) c.output_dir = *out_dir;
  return c;
}

py::dict eval_dict(const EvalOutput& r) {
  py::dict d;
  d["report"] = report_json(r.report, r.parameters);
  d["scores"] = r.scores;
  d["score_file"] = score_file(r.split.examples, r.scores);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Continuous pattern tokens for sentence-pair entailment (C++ core)";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<LengthError>(m, "LengthError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<LabelError>(m, "LabelError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  // patterning
  m.def("extend_vocabulary", [](std::size_t base_size, std::size_t n, std::size_t k) {
    return extend_vocabulary(base_size, n, k).c_ids;
  }, py::arg("base_size"), py::arg("n"), py::arg("k"));
  m.def("segment_lengths", [](std::size_t k) {
    const auto s = segment_lengths(k);
    return py::make_tuple(s.prefix, s.middle, s.suffix);
  }, py::arg("k"));
  m.def("build_template", [](const std::string& family, std::vector<TokenId> tokens,
                             std::vector<TokenId> premise, std::vector<TokenId> hypothesis) {
    return build_template({parse_family(family), std::move(tokens)}, premise, hypothesis);
  }, py::arg("family"), py::arg("tokens"), py::arg("premise"), py::arg("hypothesis"));
  m.def("added_parameters", [](std::size_t n, std::size_t k, std::size_t d, std::size_t base_parameters) {
    const auto s = parameter_summary(n, k, d, base_parameters);
    return py::make_tuple(s.added, s.added_fraction);
  }, py::arg("n"), py::arg("k"), py::arg("d"), py::arg("base_parameters"));

  // scoring
  m.def("combine", [](const std::vector<std::pair<double, double>>& probs) {
    std::vector<Probabilities> ps;
    for (auto [p1, p0] : probs) ps.push_back({p1, p0});
    const auto r = combine_probabilities(std::move(ps));
    return py::make_tuple(r.m1, r.m0, r.s);
  }, py::arg("probabilities"));
  m.def("decide", &decide, py::arg("s"), py::arg("theta"));

  // metrics
  m.def("pr_curve", [](const std::vector<double>& s, const std::vector<int>& y) {
    std::vector<py::tuple> out;
    for (const auto& p : pr_curve(s, y)) out.push_back(py::make_tuple(p.threshold, p.precision, p.recall));
    return out;
  }, py::arg("scores"), py::arg("labels"));
  m.def("auc_percent", [](const std::vector<double>& s, const std::vector<int>& y) {
    return auc_percent(auc_p50(pr_curve(s, y)));
  }, py::arg("scores"), py::arg("labels"));
  m.def("tune_threshold", [](const std::vector<double>& s, const std::vector<int>& y) {
    const auto t = tune_threshold(s, y);
    return py::make_tuple(t.threshold, t.f1);
  }, py::arg("scores"), py::arg("labels"));
  m.def("report_json", [](const std::vector<double>& s, const std::vector<int>& y, double theta) {
    return report_json(classification_report(s, y, theta));
  }, py::arg("scores"), py::arg("labels"), py::arg("theta"));

  // commands
  m.def("synth", [](const fs::path& out_dir, std::uint64_t seed, std::size_t size, double negative_rate) {
    SynthRequest req;
    req.seed = seed;
    req.options.size = size;
    req.options.negative_rate = negative_rate;
    py::gil_scoped_release release;
    cmd_synth(req, out_dir);
  }, py::arg("out_dir"), py::arg("seed") = 0, py::arg("size") = 1000, py::arg("negative_rate") = kSherliicNegativeRate);
  m.def("train", [](const fs::path& config, std::optional<std::uint64_t> seed, std::optional<fs::path> out_dir) {
    const RunConfig c = config_from(config, seed, out_dir);
    TrainOutput r;
    {
      py::gil_scoped_release release;
      r = cmd_train(c);
    }
    py::dict d;
    d["run_dir"] = r.run_dir.string();
    d["checkpoint_hash"] = r.checkpoint_hash;
    d["theta"] = r.run.theta;
    d["dev_auc_percent"] = r.run.dev_report.auc_percent;
    d["step_losses"] = r.run.history.step_losses;
    return d;
  }, py::arg("config"), py::arg("seed") = py::none(), py::arg("out_dir") = py::none());
  m.def("evaluate", [](const fs::path& checkpoint, const fs::path& test, const std::string& theta) {
    return eval_dict(cmd_eval(checkpoint, test, ThetaSource::parse(theta)));
  }, py::arg("checkpoint"), py::arg("test"), py::arg("theta") = "dev");
  m.def("transfer", [](const fs::path& checkpoint, const fs::path& test) {
    return eval_dict(cmd_transfer(checkpoint, test));
  }, py::arg("checkpoint"), py::arg("test"));
  m.def("analyze", [](const fs::path& checkpoint, std::size_t top) {
    return analysis_json(analyze_embeddings(load_checkpoint(checkpoint), top));
  }, py::arg("checkpoint"), py::arg("top") = 5);
  m.def("sweep", [](const fs::path& config, std::vector<std::size_t> n_list, std::vector<std::size_t> k_list,
                    const fs::path& out_dir, const std::vector<std::string>& families, std::size_t jobs,
                    std::optional<std::uint64_t> seed) {
    const RunConfig c = config_from(config, seed, std::nullopt);
    SweepSpec spec{std::move(n_list), std::move(k_list), {}, jobs};
    for (const auto& f : families) spec.families.push_back(parse_family(f));
    py::gil_scoped_release release;
    return sweep_csv(cmd_sweep(c, spec, out_dir));
  }, py::arg("config"), py::arg("n_list"), py::arg("k_list"), py::arg("out_dir"),
     py::arg("families") = std::vector<std::string>{"alpha", "beta"}, py::arg("jobs") = 1,
     py::arg("seed") = py::none());
}
