#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "deepfd/tensor.hpp"

namespace deepfd {

// Handle to a value recorded on a Graph. Only meaningful for the graph that
// produced it.
struct VarId {
  std::size_t index = 0;
  friend bool operator==(VarId, VarId) = default;
};

// Define-by-run reverse-mode autodiff tape.
//
// Every op appends one node holding its forward value; nodes are therefore
// stored in topological order and backward() walks them in reverse, visiting
// each node once. Gradients reaching a node from several consumers are summed.
// Leaves created with parameter() write their gradient back into the bound
// Tensor's grad buffer (accumulating, so several graphs may feed one step).
//
// Batched ops treat the leading axis as the batch axis: conv2d accepts
// C x H x W or N x C x H x W, linear accepts n or N x n, and so on.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  // Constant input; no gradient is tracked through it.
  VarId input(Tensor<T> value);
  // Trainable leaf. The graph copies the value and, on backward, adds the
  // gradient into `param`'s grad buffer. `param` must outlive backward().
  VarId parameter(Tensor<T>& param);

  VarId conv2d(VarId x, VarId weight, VarId bias, std::size_t stride, std::size_t pad);
  VarId relu(VarId x);
  VarId add(VarId a, VarId b);
  // N x ... -> N x prod(...); a rank-3 map flattens to rank 1.
  VarId flatten(VarId x);
  VarId linear(VarId x, VarId weight, VarId bias);
  VarId global_avg_pool(VarId x);
  // Softmax over the last axis, max-subtracted.
  VarId softmax(VarId x);
  // Rows [begin, end) of the leading axis.
  VarId rows(VarId x, std::size_t begin, std::size_t end);
  // Euclidean distance per row: (n, n) -> [1], (N x n, N x n) -> [N].
  VarId l2_distance(VarId a, VarId b);
  // Per-row contrastive loss of distances `e_w` with pair labels `p`.
  VarId contrastive_loss(VarId e_w, std::span<const int> p, T margin);
  // Per-row -log softmax(logits)[y], via log-sum-exp.
  VarId cross_entropy(VarId logits, std::span<const int> y);
  VarId sum(VarId x);
  VarId mean(VarId x);

  const Tensor<T>& value(VarId id) const { return nodes_.at(id.index).value; }
  // Gradient of the last backward() loss w.r.t. this node.
  std::span<const T> grad(VarId id) const;
  bool requires_grad(VarId id) const { return nodes_.at(id.index).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Populates node gradients and accumulates into bound parameters.
  // Throws ArgumentError when `loss` is not a single-element tensor.
  void backward(VarId loss);

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;  // empty until a gradient reaches the node
    bool requires_grad = false;
    Tensor<T>* param = nullptr;
    std::function<void(Graph&, std::size_t)> backward;
  };

  Node& node(VarId id) { return nodes_.at(id.index); }
  const Node& node(VarId id) const { return nodes_.at(id.index); }
  VarId push(Tensor<T> value, bool requires_grad, std::function<void(Graph&, std::size_t)> fn);
  // Gradient buffer of an input node, allocated (zeroed) on first use.
  std::vector<T>& grad_buffer(std::size_t index);

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace deepfd
