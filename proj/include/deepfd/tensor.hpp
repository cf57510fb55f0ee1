#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "deepfd/error.hpp"

namespace deepfd {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << ']';
  return os.str();
}

// Dense row-major array of rank 1..4 with an optional gradient buffer.
// Images are channels-first: C x H x W, batches N x C x H x W.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Dims dims, T fill = T{}) : dims_(std::move(dims)) {
    validate_dims();
    data_.assign(dims_product(dims_), fill);
  }

  Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != dims_product(dims_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + dims_string(dims_));
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<T> grad() {
    if (!grad_) throw StateError("tensor has no gradient");
    return *grad_;
  }
  std::span<const T> grad() const {
    if (!grad_) throw StateError("tensor has no gradient");
    return *grad_;
  }
  // Allocates a zeroed gradient buffer if missing and returns it.
  std::span<T> ensure_grad() {
    if (!grad_) grad_.emplace(data_.size(), T{});
    return *grad_;
  }
  void clear_grad() noexcept { grad_.reset(); }

  void reshape(Dims dims) {
    if (dims_product(dims) != data_.size())
      throw ShapeError("cannot reshape " + dims_string(dims_) + " to " + dims_string(dims));
    dims_ = std::move(dims);
    validate_dims();
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(dims_, std::vector<U>(data_.begin(), data_.end()));
  }

  // Value equality (dims and data); gradients are ignored.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void validate_dims() const {
    if (dims_.empty() || dims_.size() > 4)
      throw ShapeError("tensor rank must be 1..4, got " + std::to_string(dims_.size()));
    for (auto d : dims_)
      if (d == 0) throw ShapeError("tensor dims must be positive: " + dims_string(dims_));
  }

  Dims dims_;
  std::vector<T> data_;
  std::optional<std::vector<T>> grad_;
};

}  // namespace deepfd
