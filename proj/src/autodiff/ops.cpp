#include "contpat/autodiff/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace contpat::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using StridedMat = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using StridedConstMat = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

MapConstMat as_matrix(const Tensor& t) {
  return MapConstMat(t.values().data(), t.rows(), t.cols());
}

MapConstMat as_matrix(std::span<const double> data, std::size_t r, std::size_t c) {
  return MapConstMat(data.data(), r, c);
}

MapMat as_matrix(std::span<double> data, std::size_t r, std::size_t c) {
  return MapMat(data.data(), r, c);
}

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
  return a.graph();
}

enum class Broadcast { none, rows };

Broadcast check_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  const bool b_is_row = b.rank() == 1 || (b.rank() == 2 && b.rows() == 1);
  if (a.rank() == 2 && b_is_row && b.cols() == a.cols()) return Broadcast::rows;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

template <class Fwd, class Deriv>
Var unary(Var x, OpKind op, Fwd fwd, Deriv deriv) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  auto xv = in.values();
  auto yv = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = fwd(xv[i]);
  const std::size_t ix = x.id();
  return x.graph().record(op, {ix}, std::move(out), [ix, deriv](Graph& g, std::size_t self) {
    if (!g.needs_grad(ix)) return;
    auto up = g.upstream(self);
    auto xv = g.value(ix).values();
    auto yv = g.value(self).values();
    auto dx = g.adjoint_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.rows(), n = av.cols(), p = bv.cols();
  Tensor out({m, p});
  if (g.grad_enabled()) {
    as_matrix(out.values(), m, p).noalias() = as_matrix(av) * as_matrix(bv);
  } else {
    // Coefficient-wise product: each output row is computed the same way
    // whatever the row count, so inference scores do not depend on batching.
    as_matrix(out.values(), m, p).noalias() = as_matrix(av).lazyProduct(as_matrix(bv));
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(OpKind::matmul, {ia, ib}, std::move(out),
                  [ia, ib, m, n, p](Graph& g, std::size_t self) {
                    auto dc = as_matrix(g.upstream(self), m, p);
                    if (g.needs_grad(ia)) {
                      as_matrix(g.adjoint_of(ia), m, n).noalias() +=
                          dc * as_matrix(g.value(ib)).transpose();
                    }
                    if (g.needs_grad(ib)) {
                      as_matrix(g.adjoint_of(ib), n, p).noalias() +=
                          as_matrix(g.value(ia)).transpose() * dc;
                    }
                  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = check_binary(av, bv, "add");
  Tensor out = av;
  out.set_requires_grad(false);
  out.clear_grad();
  auto o = out.values();
  auto y = bv.values();
  const std::size_t cols = av.cols();
  if (mode == Broadcast::none) {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  } else {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i % cols];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(OpKind::add, {ia, ib}, std::move(out),
                  [ia, ib, mode, cols](Graph& g, std::size_t self) {
                    auto up = g.upstream(self);
                    if (g.needs_grad(ia)) {
                      auto da = g.adjoint_of(ia);
                      for (std::size_t i = 0; i < up.size(); ++i) da[i] += up[i];
                    }
                    if (g.needs_grad(ib)) {
                      auto db = g.adjoint_of(ib);
                      if (mode == Broadcast::none) {
                        for (std::size_t i = 0; i < up.size(); ++i) db[i] += up[i];
                      } else {
                        for (std::size_t i = 0; i < up.size(); ++i) db[i % cols] += up[i];
                      }
                    }
                  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = check_binary(av, bv, "mul");
  const std::size_t cols = av.cols();
  Tensor out(av.shape());
  auto o = out.values();
  auto x = av.values();
  auto y = bv.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[i] * y[mode == Broadcast::none ? i : i % cols];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(OpKind::mul, {ia, ib}, std::move(out),
                  [ia, ib, mode, cols](Graph& g, std::size_t self) {
                    auto up = g.upstream(self);
                    auto x = g.value(ia).values();
                    auto y = g.value(ib).values();
                    auto j = [&](std::size_t i) { return mode == Broadcast::none ? i : i % cols; };
                    if (g.needs_grad(ia)) {
                      auto da = g.adjoint_of(ia);
                      for (std::size_t i = 0; i < up.size(); ++i) da[i] += up[i] * y[j(i)];
                    }
                    if (g.needs_grad(ib)) {
                      auto db = g.adjoint_of(ib);
                      for (std::size_t i = 0; i < up.size(); ++i) db[j(i)] += up[i] * x[i];
                    }
                  });
}

Var scale(Var x, double factor) {
  return unary(
      x, OpKind::scale, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Var tanh(Var x) {
  return unary(
      x, OpKind::tanh, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var gelu(Var x) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, OpKind::gelu,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) +
               v * std::exp(-0.5 * v * v) * inv_sqrt_2pi;
      });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::sum, {ix}, Tensor::scalar(total),
                          [ix](Graph& g, std::size_t self) {
                            if (!g.needs_grad(ix)) return;
                            const double up = g.upstream(self)[0];
                            for (double& d : g.adjoint_of(ix)) d += up;
                          });
}

Var softmax_rows(Var x) {
  const Tensor& in = x.value();
  if (in.rank() != 2) {
    throw DimensionError("softmax_rows expects a matrix, got " + shape_str(in.shape()));
  }
  const std::size_t m = in.rows(), n = in.cols();
  Tensor out(in.shape());
  auto xv = in.values();
  auto yv = out.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = xv.data() + r * n;
    double* dst = yv.data() + r * n;
    double mx = row[0];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (dst[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < n; ++c) dst[c] /= z;
  }
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::softmax_rows, {ix}, std::move(out),
                          [ix, m, n](Graph& g, std::size_t self) {
                            if (!g.needs_grad(ix)) return;
                            auto up = g.upstream(self);
                            auto y = g.value(self).values();
                            auto dx = g.adjoint_of(ix);
                            for (std::size_t r = 0; r < m; ++r) {
                              double dot = 0.0;
                              for (std::size_t c = 0; c < n; ++c) dot += up[r * n + c] * y[r * n + c];
                              for (std::size_t c = 0; c < n; ++c) {
                                dx[r * n + c] += y[r * n + c] * (up[r * n + c] - dot);
                              }
                            }
                          });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) {
    throw DimensionError("gather_rows expects a matrix table, got " + shape_str(tv.shape()));
  }
  const std::size_t rows = tv.rows(), d = tv.cols();
  for (std::size_t id : ids) {
    if (id >= rows) {
      throw IndexError("gather_rows: id " + std::to_string(id) +
                       " out of range for table with " + std::to_string(rows) + " rows");
    }
  }
  Tensor out({ids.size(), d});
  auto src = tv.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(src.data() + ids[i] * d, d, dst.data() + i * d);
  }
  const std::size_t it = table.id();
  return table.graph().record(
      OpKind::gather_rows, {it}, std::move(out),
      [it, d, index = std::vector<std::size_t>(ids.begin(), ids.end())](Graph& g, std::size_t self) {
        if (!g.needs_grad(it)) return;
        auto up = g.upstream(self);
        auto dt = g.adjoint_of(it);
        for (std::size_t i = 0; i < index.size(); ++i) {
          double* row = dt.data() + index[i] * d;
          for (std::size_t c = 0; c < d; ++c) row[c] += up[i * d + c];
        }
      });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
  Graph& g = same_graph(x, gain);
  same_graph(x, bias);
  const Tensor& in = x.value();
  const std::size_t m = in.rows(), n = in.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match rows of " +
                         shape_str(in.shape()));
  }
  auto normalized = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  Tensor out(in.shape());
  auto xv = in.values();
  auto gv = gain.value().values();
  auto bv = bias.value().values();
  auto yv = out.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = xv.data() + r * n;
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += row[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (row[c] - mean) * is;
      (*normalized)[r * n + c] = h;
      yv[r * n + c] = gv[c] * h + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.record(
      OpKind::layer_norm, {ix, ig, ib}, std::move(out),
      [ix, ig, ib, m, n, normalized, inv_std](Graph& g, std::size_t self) {
        auto up = g.upstream(self);
        const auto& h = *normalized;
        if (g.needs_grad(ig)) {
          auto dg = g.adjoint_of(ig);
          for (std::size_t i = 0; i < m * n; ++i) dg[i % n] += up[i] * h[i];
        }
        if (g.needs_grad(ib)) {
          auto db = g.adjoint_of(ib);
          for (std::size_t i = 0; i < m * n; ++i) db[i % n] += up[i];
        }
        if (!g.needs_grad(ix)) return;
        auto gv = g.value(ig).values();
        auto dx = g.adjoint_of(ix);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < m; ++r) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            const double dh = up[r * n + c] * gv[c];
            mean_dh += dh;
            mean_dh_h += dh * h[r * n + c];
          }
          mean_dh *= inv_n;
          mean_dh_h *= inv_n;
          for (std::size_t c = 0; c < n; ++c) {
            const double dh = up[r * n + c] * gv[c];
            dx[r * n + c] += (*inv_std)[r] * (dh - mean_dh - h[r * n + c] * mean_dh_h);
          }
        }
      });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const Tensor& in = x.value();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(in.size());
  Tensor out(in.shape());
  auto xv = in.values();
  auto yv = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = unit(rng) < rate ? 0.0 : keep_scale;
    yv[i] = xv[i] * (*mask)[i];
  }
  const std::size_t ix = x.id();
  return x.graph().record(OpKind::dropout, {ix}, std::move(out),
                          [ix, mask](Graph& g, std::size_t self) {
                            if (!g.needs_grad(ix)) return;
                            auto up = g.upstream(self);
                            auto dx = g.adjoint_of(ix);
                            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i] * (*mask)[i];
                          });
}

Var nll_from_logits(Var logits, std::span<const int> labels) {
  const Tensor& in = logits.value();
  if (in.rank() != 2 || in.cols() != 2) {
    throw DimensionError("nll_from_logits expects [m x 2] logits, got " + shape_str(in.shape()));
  }
  const std::size_t m = in.rows();
  if (labels.size() != m) {
    throw DimensionError("nll_from_logits: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(m) + " rows");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw LabelError("label must be 0 or 1, got " + std::to_string(y));
  }
  auto probs = std::make_shared<std::vector<double>>(2 * m);
  double total = 0.0;
  auto xv = in.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double a = xv[2 * r], b = xv[2 * r + 1];
    const double mx = std::max(a, b);
    const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
    total += lse - xv[2 * r + static_cast<std::size_t>(labels[r])];
    (*probs)[2 * r] = std::exp(a - lse);
    (*probs)[2 * r + 1] = std::exp(b - lse);
  }
  const double mean = m ? total / static_cast<double>(m) : 0.0;
  const std::size_t ix = logits.id();
  return logits.graph().record(
      OpKind::nll, {ix}, Tensor::scalar(mean),
      [ix, m, probs, y = std::vector<int>(labels.begin(), labels.end())](Graph& g, std::size_t self) {
        if (!g.needs_grad(ix)) return;
        const double up = g.upstream(self)[0] / static_cast<double>(m);
        auto dx = g.adjoint_of(ix);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < 2; ++c) {
            const double target = static_cast<int>(c) == y[r] ? 1.0 : 0.0;
            dx[2 * r + c] += up * ((*probs)[2 * r + c] - target);
          }
        }
      });
}

Var multi_head_attention(Var q, Var k, Var v, std::span<const Segment> segments,
                         std::size_t n_heads, double rate, Rng& rng, bool training,
                         std::vector<Tensor>* weights_out) {
  Graph& g = same_graph(q, k);
  same_graph(q, v);
  const Tensor& qv = q.value();
  if (qv.rank() != 2 || k.shape() != qv.shape() || v.shape() != qv.shape()) {
    throw DimensionError("attention: q/k/v shapes " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()) + " must agree");
  }
  const std::size_t rows = qv.rows(), d = qv.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) +
                         " not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("attention dropout rate must lie in [0, 1)");
  }
  for (const Segment& s : segments) {
    if (s.offset + s.length > rows) throw IndexError("attention: segment exceeds rows");
  }
  const std::size_t dh = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = training && rate > 0.0;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Block {
    RowMat probs;
    RowMat mask;  // empty when no dropout
  };
  auto blocks = std::make_shared<std::vector<Block>>();
  blocks->reserve(segments.size() * n_heads);

  Tensor out({rows, d});
  const double* qp = qv.values().data();
  const double* kp = k.value().values().data();
  const double* vp = v.value().values().data();
  double* op = out.values().data();
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));
  for (const Segment& s : segments) {
    const auto len = static_cast<Eigen::Index>(s.length);
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t base = s.offset * d + h * dh;
      StridedConstMat qh(qp + base, len, dh, stride);
      StridedConstMat kh(kp + base, len, dh, stride);
      StridedConstMat vh(vp + base, len, dh, stride);
      Block block;
      RowMat scores = (qh * kh.transpose()) * inv_sqrt;
      for (Eigen::Index r = 0; r < len; ++r) {
        const double mx = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - mx).exp().matrix();
        scores.row(r) /= scores.row(r).sum();
      }
      block.probs = std::move(scores);
      StridedMat oh(op + base, len, dh, stride);
      if (drop) {
        block.mask.resize(len, len);
        for (Eigen::Index i = 0; i < block.mask.size(); ++i) {
          block.mask.data()[i] = unit(rng) < rate ? 0.0 : keep_scale;
        }
        oh.noalias() = block.probs.cwiseProduct(block.mask) * vh;
      } else {
        oh.noalias() = block.probs * vh;
      }
      if (weights_out) {
        weights_out->emplace_back(
            Shape{s.length, s.length},
            std::vector<double>(block.probs.data(), block.probs.data() + block.probs.size()));
      }
      blocks->push_back(std::move(block));
    }
  }

  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return g.record(
      OpKind::attention, {iq, ik, iv}, std::move(out),
      [iq, ik, iv, d, dh, n_heads, inv_sqrt, blocks,
       segs = std::vector<Segment>(segments.begin(), segments.end())](Graph& g, std::size_t self) {
        const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));
        const double* up = g.upstream(self).data();
        const double* qp = g.value(iq).values().data();
        const double* kp = g.value(ik).values().data();
        const double* vp = g.value(iv).values().data();
        double* dq = g.needs_grad(iq) ? g.adjoint_of(iq).data() : nullptr;
        double* dk = g.needs_grad(ik) ? g.adjoint_of(ik).data() : nullptr;
        double* dv = g.needs_grad(iv) ? g.adjoint_of(iv).data() : nullptr;
        std::size_t bi = 0;
        for (const Segment& s : segs) {
          const auto len = static_cast<Eigen::Index>(s.length);
          for (std::size_t h = 0; h < n_heads; ++h, ++bi) {
            const Block& block = (*blocks)[bi];
            const std::size_t base = s.offset * d + h * dh;
            StridedConstMat doh(up + base, len, dh, stride);
            StridedConstMat qh(qp + base, len, dh, stride);
            StridedConstMat kh(kp + base, len, dh, stride);
            StridedConstMat vh(vp + base, len, dh, stride);
            const bool masked = block.mask.size() > 0;
            RowMat used = masked ? RowMat(block.probs.cwiseProduct(block.mask)) : block.probs;
            if (dv) StridedMat(dv + base, len, dh, stride).noalias() += used.transpose() * doh;
            if (!dq && !dk) continue;
            RowMat dp = doh * vh.transpose();
            if (masked) dp = dp.cwiseProduct(block.mask);
            RowMat ds(len, len);
            for (Eigen::Index r = 0; r < len; ++r) {
              const double dot = dp.row(r).dot(block.probs.row(r));
              ds.row(r) = block.probs.row(r).cwiseProduct(
                  (dp.row(r).array() - dot).matrix());
            }
            ds *= inv_sqrt;
            if (dq) StridedMat(dq + base, len, dh, stride).noalias() += ds * kh;
            if (dk) StridedMat(dk + base, len, dh, stride).noalias() += ds.transpose() * qh;
          }
        }
      });
}

}  // namespace contpat::ad
