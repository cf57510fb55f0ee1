#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

#include "deepfd/params.hpp"

namespace deepfd {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates, one pair per parameter, plus the shared step
// counter used for bias correction.
template <typename T>
struct AdamState {
  AdamHyper hyper;
  ParamSet<T> first_moment;
  ParamSet<T> second_moment;
  std::uint64_t step = 0;

  // Zero moments shaped like every tensor in `params`.
  static AdamState zeros_like(const ParamSet<T>& params, AdamHyper hyper = {});
};

using ParamFilter = std::function<bool(std::string_view name)>;

// One bias-corrected Adam update over the parameters accepted by `filter`
// (all of them when empty); their gradients are cleared afterwards. Throws
// StateError if a selected parameter has no gradient or no moment slot.
template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr, const ParamFilter& filter = {});

extern template struct AdamState<float>;
extern template struct AdamState<double>;
extern template void adam_step(ParamSet<float>&, AdamState<float>&, double, const ParamFilter&);
extern template void adam_step(ParamSet<double>&, AdamState<double>&, double, const ParamFilter&);

}  // namespace deepfd
