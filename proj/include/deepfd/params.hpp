#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepfd/tensor.hpp"

namespace deepfd {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

// Ordered collection of named parameter tensors. Order is insertion order and
// is the serialization order.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, Tensor<T> tensor) {
    if (find(name) != nullptr) throw ArgumentError("duplicate parameter " + name);
    entries_.push_back({std::move(name), std::move(tensor)});
  }

  Tensor<T>* find(std::string_view name) {
    for (auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }
  const Tensor<T>* find(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }
  Tensor<T>& at(std::string_view name) {
    if (auto* t = find(name)) return *t;
    throw ArgumentError("unknown parameter " + std::string(name));
  }
  const Tensor<T>& at(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw ArgumentError("unknown parameter " + std::string(name));
  }

  std::vector<NamedTensor<T>>& entries() noexcept { return entries_; }
  const std::vector<NamedTensor<T>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void clear_grads() {
    for (auto& e : entries_) e.tensor.clear_grad();
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.tensor.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].name != b.entries_[i].name ||
          !(a.entries_[i].tensor == b.entries_[i].tensor))
        return false;
    return true;
  }

 private:
  std::vector<NamedTensor<T>> entries_;
};

}  // namespace deepfd
