#include "contpat/autodiff/graph.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "contpat/common.hpp"

namespace contpat::ad {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::tanh: return "tanh";
    case OpKind::gelu: return "gelu";
    case OpKind::sum: return "sum";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::dropout: return "dropout";
    case OpKind::nll: return "nll";
    case OpKind::attention: return "attention";
  }
  return "?";
}

const Tensor& Var::value() const { return graph_->value(id_); }

const Tensor& Graph::value(std::size_t id) const {
  const Node& node = nodes_[id];
  return node.bound ? *node.bound : node.owned;
}

Var Graph::constant(Tensor value) {
  Node node;
  node.op = OpKind::constant;
  node.needs_grad = grad_enabled_ && value.requires_grad();
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Tensor& bound) {
  Node node;
  node.op = OpKind::parameter;
  node.bound = &bound;
  node.needs_grad = grad_enabled_ && bound.requires_grad();
  if (node.needs_grad) node.sink = &bound;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const Tensor& bound) {
  Node node;
  node.op = OpKind::parameter;
  node.bound = &bound;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(OpKind op, std::vector<std::size_t> inputs, Tensor value,
                  BackwardFn backward) {
  const std::size_t id = nodes_.size();
  Node node;
  node.op = op;
  for (std::size_t in : inputs) {
    assert(in < id);
    node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  }
#ifndef NDEBUG
  for (double v : value.values()) assert(std::isfinite(v));
#endif
  node.inputs = std::move(inputs);
  node.owned = std::move(value);
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

std::span<double> Graph::adjoint_of(std::size_t id) {
  Node& node = nodes_[id];
  if (node.adjoint.empty()) node.adjoint.assign(value(id).size(), 0.0);
  return node.adjoint;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw Error("backward: variable belongs to another graph");
  if (loss.value().size() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " +
                         shape_str(loss.shape()));
  }
  for (Node& node : nodes_) node.adjoint.clear();
  if (!nodes_[loss.id()].needs_grad) return;
  adjoint_of(loss.id())[0] = 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.adjoint.empty()) continue;
    if (node.backward) node.backward(*this, i);
    if (node.sink) {
      auto grad = node.sink->grad();
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += node.adjoint[j];
    }
  }
  for (Node& node : nodes_) {
    if (node.op == OpKind::constant && node.owned.requires_grad() &&
        !node.adjoint.empty()) {
      auto grad = node.owned.grad();
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += node.adjoint[j];
    }
  }
}

}  // namespace contpat::ad
