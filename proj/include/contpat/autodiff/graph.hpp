#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "contpat/autodiff/tensor.hpp"

namespace contpat::ad {

class Graph;

enum class OpKind {
  constant,
  parameter,
  matmul,
  add,
  mul,
  scale,
  tanh,
  gelu,
  sum,
  softmax_rows,
  gather_rows,
  layer_norm,
  dropout,
  nll,
  attention,
};

const char* op_name(OpKind op);

// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph& graph() const noexcept { return *graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run tape. Nodes are appended in evaluation order, so insertion
// order is a topological order and backward() is a single reverse sweep.
//
// Parameter leaves refer to tensors owned elsewhere; those tensors must
// outlive the graph. Leaves bound through a mutable reference receive
// gradients in their own grad buffer when they require grad; leaves bound
// through a const reference never do.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value);
  Var parameter(Tensor& bound);
  Var parameter(const Tensor& bound);

  // Reverse sweep from a scalar loss. Node adjoints are reset on entry;
  // gradients of bound parameters accumulate across calls.
  void backward(Var loss);

  OpKind op(Var v) const { return nodes_[v.id()].op; }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_[id].inputs; }
  const Tensor& value(std::size_t id) const;
  // Adjoint of a node after backward(); empty when the node needs no grad.
  std::span<const double> adjoint(Var v) const { return nodes_[v.id()].adjoint; }

  // Operator-implementation interface.
  Var record(OpKind op, std::vector<std::size_t> inputs, Tensor value,
             BackwardFn backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::span<const double> upstream(std::size_t id) const { return nodes_[id].adjoint; }
  // Zero-initialized on first use within a sweep.
  std::span<double> adjoint_of(std::size_t id);

 private:
  struct Node {
    OpKind op = OpKind::constant;
    std::vector<std::size_t> inputs;
    Tensor owned;
    const Tensor* bound = nullptr;
    Tensor* sink = nullptr;
    bool needs_grad = false;
    std::vector<double> adjoint;
    BackwardFn backward;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

}  // namespace contpat::ad
