#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "petseg/tensor.hpp"

namespace petseg {

/// First/second moment buffers, one pair per parameter tensor.
template <class S>
struct AdamState {
  int64_t step = 0;
  std::vector<std::vector<S>> m, v;
};

/// One Adam update with bias correction. Parameters with an empty gradient
/// buffer are treated as having zero gradient. Deterministic given inputs.
template <class S>
void adam_step(const std::vector<TensorPtr<S>>& params, AdamState<S>& state,
               S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8)) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->data.size(), S(0));
      state.v[i].assign(params[i]->data.size(), S(0));
    }
  }
  if (state.m.size() != params.size())
    throw ValueError(fmt::format("adam_step: state holds {} parameters, got {}", state.m.size(), params.size()));
  state.step += 1;
  const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), static_cast<double>(state.step)));
  const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), static_cast<double>(state.step)));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (state.m[i].size() != p.data.size())
      throw ValueError(fmt::format("adam_step: state size {} does not match parameter size {}",
                                   state.m[i].size(), p.data.size()));
    S* m = state.m[i].data();
    S* v = state.v[i].data();
    const bool has_g = p.has_grad();
    const S* grad = has_g ? p.grad.data() : nullptr;
    const int64_t n = p.numel();
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < n; ++j) {
      const S gj = has_g ? grad[j] : S(0);
      m[j] = beta1 * m[j] + (S(1) - beta1) * gj;
      v[j] = beta2 * v[j] + (S(1) - beta2) * gj * gj;
      const S mhat = m[j] / bc1;
      const S vhat = v[j] / bc2;
      p.data[static_cast<size_t>(j)] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace petseg
