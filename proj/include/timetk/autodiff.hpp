#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "timetk/tensor.hpp"

namespace timetk {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

// One vertex of the reverse-mode graph. `grad` always has the shape of `value`.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<NodePtr> parents;
  BackwardFn backward_fn;
  bool requires_grad = false;
  const char* op = "leaf";
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  void zero_grad() { node_->grad.fill(0.0); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }

// Builds a result node. Throws NumericError when `value` holds NaN/Inf.
// Parents and the backward closure are dropped when grad recording is off
// or no parent requires grad.
Var make_result(Tensor value, std::vector<Var> parents, BackwardFn fn, const char* op);

// Reverse pass from a scalar-shaped node. Each reachable node runs its
// backward closure once, in reverse topological order.
void backward(const Var& loss);

// Disables graph construction on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Trainable leaf with a unique dotted name, e.g. "blocks.0.mikan.weights".
struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
};

using ParameterList = std::vector<Parameter>;

Parameter make_parameter(std::string name, Tensor init, bool trainable = true);

// Throws ConfigError on duplicate names.
void check_unique_names(const ParameterList& params);
std::size_t count_scalars(const ParameterList& params, bool trainable_only = true);
void zero_grads(const ParameterList& params);

}  // namespace timetk
