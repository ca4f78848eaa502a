#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memetrn/numerics/parameter.hpp"
#include "memetrn/numerics/rng.hpp"
#include "memetrn/numerics/tensor.hpp"

namespace memetrn {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
// has not been reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct TapeOptions {
  // Enables dropout. Evaluation and gradient checks run with training=false.
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

// Append-only record of a forward computation. Node ids grow monotonically, so
// every node's inputs precede it and reverse id order is a valid reverse
// topological order.
class Tape {
 public:
  // Reads the node's output gradient, accumulates into its inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  explicit Tape(TapeOptions options = {});
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable leaf not bound to a Parameter; read its gradient with grad().
  Var leaf(Tensor value);
  // Leaf bound to a parameter. Repeated calls return the same node, so all
  // uses within one tape accumulate into one gradient.
  Var param(Parameter& p);

  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  // Reverse sweep from a scalar root. Parameter gradients are added to
  // Parameter::grad. A tape can be swept once; reset() before reuse.
  void backward(Var root);

  // Gradient of the last backward() root w.r.t. v (zeros if unreachable).
  Tensor grad(Var v) const;

  // Used by backward functions.
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor& grad_buffer(std::size_t id);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

  void reset();
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  bool topologically_ordered() const;

  bool training() const { return options_.training; }
  Rng& dropout_rng() { return dropout_rng_; }

 private:
  Var push(Node node);

  TapeOptions options_;
  Rng dropout_rng_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool swept_ = false;
};

}  // namespace memetrn
