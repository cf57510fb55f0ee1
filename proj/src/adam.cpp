#include "deepfd/adam.hpp"

#include <cmath>

namespace deepfd {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ParamSet<T>& params, AdamHyper hyper) {
  AdamState state;
  state.hyper = hyper;
  for (const auto& e : params.entries()) {
    state.first_moment.add(e.name, Tensor<T>(e.tensor.dims()));
    state.second_moment.add(e.name, Tensor<T>(e.tensor.dims()));
  }
  return state;
}

template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr, const ParamFilter& filter) {
  std::vector<NamedTensor<T>*> selected;
  for (auto& e : params.entries()) {
    if (filter && !filter(e.name)) continue;
    if (!e.tensor.has_grad()) throw StateError("adam_step: parameter " + e.name + " has no gradient");
    if (state.first_moment.find(e.name) == nullptr || state.second_moment.find(e.name) == nullptr)
      throw StateError("adam_step: no moment slot for " + e.name);
    selected.push_back(&e);
  }

  ++state.step;
  const auto t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.hyper.beta1);
  const T b2 = static_cast<T>(state.hyper.beta2);
  const T eps = static_cast<T>(state.hyper.epsilon);
  const T correction1 = static_cast<T>(1.0 - std::pow(state.hyper.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(state.hyper.beta2, t));
  const T rate = static_cast<T>(lr);

  for (auto* e : selected) {
    auto theta = e->tensor.data();
    auto g = e->tensor.grad();
    auto m = state.first_moment.at(e->name).data();
    auto v = state.second_moment.at(e->name).data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      theta[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
    }
    e->tensor.clear_grad();
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParamSet<float>&, AdamState<float>&, double, const ParamFilter&);
template void adam_step(ParamSet<double>&, AdamState<double>&, double, const ParamFilter&);

}  // namespace deepfd
