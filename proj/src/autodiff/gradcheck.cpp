#include "contpat/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "contpat/common.hpp"

namespace contpat::ad {
namespace {

double evaluate(const LossBuilder& f) {
  Graph g(false);
  return f(g).value().item();
}

}  // namespace

GradCheckResult finite_diff_check(const LossBuilder& f, std::span<Tensor* const> params,
                                  const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ParameterError("finite_diff_check: step must be positive");
  for (Tensor* p : params) {
    p->set_requires_grad(true);
    p->clear_grad();
  }
  {
    Graph g;
    g.backward(f(g));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  std::size_t total = 0;
  for (Tensor* p : params) total += p->size();
  if (options.samples == 0 || options.samples >= total) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t]->size(); ++i) coords.emplace_back(t, i);
    }
  } else {
    Rng rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t s = 0; s < options.samples; ++s) {
      std::size_t flat = pick(rng);
      std::size_t t = 0;
      while (flat >= params[t]->size()) flat -= params[t++]->size();
      coords.emplace_back(t, flat);
    }
  }

  GradCheckResult result;
  for (auto [t, i] : coords) {
    Tensor& p = *params[t];
    const double analytic = p.has_grad() ? p.grad()[i] : 0.0;
    const double original = p[i];
    p[i] = original + options.step;
    const double plus = evaluate(f);
    p[i] = original - options.step;
    const double minus = evaluate(f);
    p[i] = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double err = std::abs(analytic - numeric) /
                       std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    result.max_rel_error = std::max(result.max_rel_error, err);
    ++result.checked;
  }
  for (Tensor* p : params) p->clear_grad();
  return result;
}

}  // namespace contpat::ad
