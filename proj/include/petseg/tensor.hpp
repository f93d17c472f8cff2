#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "petseg/common.hpp"

namespace petseg {

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
  return fmt::format("[{}]", fmt::join(shape, ","));
}

/// Dense N-D array of scalars. Feature maps use [channels, depth, height,
/// width] with the last extent contiguous; linear index of (c,z,y,x) is
/// ((c*D + z)*H + y)*W + x. `grad` is empty until a backward pass deposits
/// into it, and only tensors with requires_grad set may receive gradient.
template <class S>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<S> data;
  bool requires_grad = false;
  std::vector<S> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape_, bool requires_grad_ = false)
      : shape(std::move(shape_)), requires_grad(requires_grad_) {
    for (int64_t e : shape)
      if (e <= 0) throw ValueError(fmt::format("tensor extents must be positive, got {}", shape_str(shape)));
    data.assign(static_cast<size_t>(shape_numel(shape)), S(0));
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(size_t i) const { return shape.at(i); }

  bool has_grad() const { return !grad.empty(); }

  /// Allocate the gradient buffer (zeroed) if absent.
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), S(0));
  }

  void zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), S(0));
  }

  /// Add `g` (length numel) into the gradient buffer. Rejected for tensors
  /// that do not require gradient.
  void accumulate_grad(const S* g, int64_t n) {
    if (!requires_grad) throw ValueError("gradient contribution to a tensor with requires_grad=false");
    if (n != numel()) throw ValueError(fmt::format("gradient length {} does not match tensor numel {}", n, numel()));
    ensure_grad();
    for (int64_t i = 0; i < n; ++i) grad[static_cast<size_t>(i)] += g[i];
  }
};

template <class S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

template <class S>
TensorPtr<S> make_tensor(std::vector<int64_t> shape, bool requires_grad = false) {
  return std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
}

template <class S>
TensorPtr<S> make_tensor(std::vector<int64_t> shape, std::vector<S> data, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
  if (static_cast<int64_t>(data.size()) != t->numel())
    throw ValueError(fmt::format("data length {} does not match shape {}", data.size(), shape_str(t->shape)));
  t->data = std::move(data);
  return t;
}

template <class S>
TensorPtr<S> make_scalar(S value, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<S>>(std::vector<int64_t>{1}, requires_grad);
  t->data[0] = value;
  return t;
}

template <class S>
TensorPtr<S> make_full(std::vector<int64_t> shape, S value, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

}  // namespace petseg
