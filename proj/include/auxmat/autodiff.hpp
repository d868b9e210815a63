#pragma once

// Minimal reverse-mode differentiation over dense C x H x W tensors.
//
// A tensor is a handle to a graph node. Ops create new nodes that hold their
// inputs and a backward rule; calling backward() on a scalar walks the graph
// once in reverse topological order. Leaves created with parameter() keep
// their accumulated gradient until zero_grad().

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace auxmat::ad {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::string shape_string(const Shape& s);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  std::string op;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<Node<T>>;

  BasicTensor() = default;
  explicit BasicTensor(NodePtr node) : node_(std::move(node)) {}

  static BasicTensor constant(Shape shape, std::vector<T> data, std::string op = "constant") {
    return make_leaf(std::move(shape), std::move(data), false, std::move(op));
  }
  static BasicTensor parameter(Shape shape, std::vector<T> data, std::string op = "parameter") {
    return make_leaf(std::move(shape), std::move(data), true, std::move(op));
  }
  static BasicTensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> data(auxmat::ad::numel(shape), T(0));
    return make_leaf(std::move(shape), std::move(data), requires_grad, requires_grad ? "parameter" : "constant");
  }
  static BasicTensor scalar(T v) { return constant({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  int rank() const { return static_cast<int>(node().shape.size()); }
  int dim(int i) const { return node().shape.at(static_cast<std::size_t>(i)); }
  int channels() const { return dim(0); }
  int height() const { return dim(1); }
  int width() const { return dim(2); }
  std::size_t numel() const { return node().value.size(); }

  std::span<const T> value() const { return node().value; }
  /// In-place edit of leaf data (optimizer updates, tests). Not recorded.
  std::span<T> mutable_value() { return node().value; }
  std::span<const T> grad() const { return node().grad; }
  T item() const {
    if (numel() != 1) throw std::logic_error("item(): tensor has " + std::to_string(numel()) + " elements");
    return node().value[0];
  }
  bool requires_grad() const { return node().requires_grad; }
  const std::string& op() const { return node().op; }
  Node<T>* raw() const { return node_.get(); }
  const NodePtr& ptr() const { return node_; }

  void zero_grad() { std::fill(node().grad.begin(), node().grad.end(), T(0)); }

  /// Reverse pass from a single-element tensor.
  void backward() const {
    if (numel() != 1) throw std::logic_error("backward(): root must hold one element");
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{raw(), 0}};
    seen.insert(raw());
    // Iterative post-order DFS: each node lands in `order` after all its inputs.
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->inputs.size()) {
        Node<T>* child = n->inputs[next++].get();
        if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    for (Node<T>* n : order) {
      if (!n->backward) {
        n->ensure_grad();
      } else {
        n->grad.assign(n->value.size(), T(0));
      }
    }
    node().grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward) (*it)->backward(**it);
    }
  }

  /// True if `other`'s node is this tensor or one of its ancestors.
  bool depends_on(const BasicTensor& other) const {
    std::vector<Node<T>*> stack{raw()};
    std::unordered_set<Node<T>*> seen{raw()};
    while (!stack.empty()) {
      Node<T>* n = stack.back();
      stack.pop_back();
      if (n == other.raw()) return true;
      for (const auto& in : n->inputs) {
        if (seen.insert(in.get()).second) stack.push_back(in.get());
      }
    }
    return false;
  }

 private:
  static BasicTensor make_leaf(Shape shape, std::vector<T> data, bool requires_grad, std::string op) {
    if (data.size() != auxmat::ad::numel(shape)) {
      throw std::invalid_argument("tensor data length does not match shape " + shape_string(shape));
    }
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->op = std::move(op);
    if (requires_grad) n->ensure_grad();
    return BasicTensor(std::move(n));
  }

  Node<T>& node() const {
    if (!node_) throw std::logic_error("use of undefined tensor");
    return *node_;
  }

  NodePtr node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Builds an op node. `rule` receives the finished node (its grad is the
/// upstream gradient) and must accumulate into the inputs' grads. The rule is
/// dropped when no input needs a gradient.
template <typename T>
BasicTensor<T> make_op(std::string op, Shape shape, std::vector<T> value,
                       std::vector<BasicTensor<T>> inputs, std::function<void(Node<T>&)> rule) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = std::move(op);
  bool needs = false;
  for (auto& in : inputs) {
    needs = needs || in.requires_grad();
    n->inputs.push_back(in.ptr());
  }
  n->requires_grad = needs;
  if (needs) n->backward = std::move(rule);
  return BasicTensor<T>(std::move(n));
}

/// Gradient slot of input i, or nullptr when that input does not need one.
template <typename T>
std::vector<T>* input_grad(Node<T>& n, std::size_t i) {
  Node<T>& in = *n.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return &in.grad;
}

}  // namespace auxmat::ad
