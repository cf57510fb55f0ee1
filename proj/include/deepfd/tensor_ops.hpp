#pragma once

// Value-level forms of the graph primitives, for callers that do not need
// gradients. Each call records a throwaway graph.

#include <cmath>
#include <span>

#include "deepfd/graph.hpp"

namespace deepfd {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
  Graph<T> g;
  return g.value(g.conv2d(g.input(input), g.input(weight), g.input(bias), stride, pad));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Graph<T> g;
  return g.value(g.relu(g.input(input)));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  Graph<T> g;
  return g.value(g.linear(g.input(input), g.input(weight), g.input(bias)));
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  Graph<T> g;
  return g.value(g.global_avg_pool(g.input(input)));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& input) {
  Graph<T> g;
  return g.value(g.softmax(g.input(input)));
}

template <typename T>
T l2_distance(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw ShapeError("l2_distance: expected vectors");
  Graph<T> g;
  return g.value(g.l2_distance(g.input(a), g.input(b)))[0];
}

}  // namespace deepfd
