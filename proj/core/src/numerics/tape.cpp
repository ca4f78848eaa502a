#include "memetrn/numerics/tape.hpp"

#include "memetrn/errors.hpp"

namespace memetrn {

const Tensor& Var::value() const { return tape_->value(id_); }

Tape::Tape(TapeOptions options)
    : options_(options), dropout_rng_(options.dropout_seed, Rng::hash("dropout")) {}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "param";
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  if (swept_) throw ContractViolation("recording onto a tape after backward(); call reset() first");
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw ContractViolation(std::string(op) + ": input from a different tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  // Nodes that cannot reach a differentiable leaf keep no closure.
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw ContractViolation("backward: root belongs to a different tape");
  if (swept_) throw ContractViolation("backward: tape already swept; reset() before a second backward");
  if (root.value().size() != 1) {
    throw ContractViolation("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  swept_ = true;
  grad_buffer(root.id())[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.shape() != n.value.shape()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) {
      Tensor& dst = n.param->grad;
      if (dst.shape() != n.value.shape()) dst = Tensor::zeros(n.value.shape());
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.shape() != n.value.shape()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::reset() {
  nodes_.clear();
  param_nodes_.clear();
  swept_ = false;
}

bool Tape::topologically_ordered() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t in : nodes_[i].inputs) {
      if (in >= i) return false;
    }
  }
  return true;
}

}  // namespace memetrn
