#include "timetk/autodiff.hpp"

#include <unordered_set>

#include "timetk/error.hpp"

namespace timetk {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->grad = Tensor(value.shape(), 0.0);
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var make_result(Tensor value, std::vector<Var> parents, BackwardFn fn, const char* op) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op + " " + shape_str(value.shape()));
  auto node = std::make_shared<Node>();
  node->grad = Tensor(value.shape(), 0.0);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.value().numel() != 1)
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

Parameter make_parameter(std::string name, Tensor init, bool trainable) {
  return Parameter{std::move(name), Var(std::move(init), trainable), trainable};
}

void check_unique_names(const ParameterList& params) {
  std::unordered_set<std::string> seen;
  for (const auto& p : params)
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter name: " + p.name);
}

std::size_t count_scalars(const ParameterList& params, bool trainable_only) {
  std::size_t n = 0;
  for (const auto& p : params)
    if (p.trainable || !trainable_only) n += p.var.value().numel();
  return n;
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    Var v = p.var;
    v.zero_grad();
  }
}

}  // namespace timetk
