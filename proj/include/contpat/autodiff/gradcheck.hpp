#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "contpat/autodiff/graph.hpp"

namespace contpat::ad {

// Builds a scalar loss on the given graph from tensors the caller binds
// with Graph::parameter. Must be a deterministic function of parameter
// values.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates sampled uniformly over all parameters; 0 checks every one.
  std::size_t samples = 50;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares backward() against central differences. The relative error of a
// coordinate is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Gradients of `params` are cleared before and after.
GradCheckResult finite_diff_check(const LossBuilder& f, std::span<Tensor* const> params,
                                  const GradCheckOptions& options = {});

}  // namespace contpat::ad
