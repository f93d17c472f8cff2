#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "petseg/graph.hpp"
#include "petseg/kernels.hpp"
#include "petseg/tensor.hpp"

namespace petseg {

enum class Padding { same, valid };

namespace detail {

template <class S>
bool want_grad(const Graph<S>& g, std::initializer_list<const TensorPtr<S>*> ins) {
  if (!g.recording()) return false;
  for (auto* t : ins)
    if (*t && (*t)->requires_grad) return true;
  return false;
}

inline void expect_rank(const std::vector<int64_t>& shape, size_t rank, const char* op) {
  if (shape.size() != rank)
    throw ValueError(fmt::format("{}: expected rank-{} tensor, got shape {}", op, rank, shape_str(shape)));
}

}  // namespace detail

/// Stride-1 3D convolution (cross-correlation). input [Cin,D,H,W],
/// weights [Cout,Cin,k,k,k] with odd k, bias [Cout]. Padding::same keeps the
/// spatial extents via zero borders; Padding::valid shrinks them by k-1.
template <class S>
TensorPtr<S> conv3d(Graph<S>& g, const TensorPtr<S>& input, const TensorPtr<S>& weights,
                    const TensorPtr<S>& bias, Padding padding) {
  detail::expect_rank(input->shape, 4, "conv3d");
  detail::expect_rank(weights->shape, 5, "conv3d");
  detail::expect_rank(bias->shape, 1, "conv3d");
  const int64_t Cin = input->shape[0], D = input->shape[1], H = input->shape[2], W = input->shape[3];
  const int64_t Cout = weights->shape[0], k = weights->shape[2];
  if (weights->shape[3] != k || weights->shape[4] != k)
    throw ValueError(fmt::format("conv3d: kernel must be cubic, got weight shape {}", shape_str(weights->shape)));
  if (k % 2 == 0) throw ValueError(fmt::format("conv3d: kernel size must be odd, got {}", k));
  if (weights->shape[1] != Cin)
    throw ValueError(fmt::format("conv3d: input has {} channels (shape {}) but weights expect {} (shape {})",
                                 Cin, shape_str(input->shape), weights->shape[1], shape_str(weights->shape)));
  if (bias->shape[0] != Cout)
    throw ValueError(fmt::format("conv3d: bias shape {} does not match {} output channels",
                                 shape_str(bias->shape), Cout));
  const int64_t pad = padding == Padding::same ? (k - 1) / 2 : 0;
  const int64_t Do = D + 2 * pad - k + 1, Ho = H + 2 * pad - k + 1, Wo = W + 2 * pad - k + 1;
  if (Do < 1 || Ho < 1 || Wo < 1)
    throw ValueError(fmt::format("conv3d: input {} too small for valid k={}", shape_str(input->shape), k));

  auto out = make_tensor<S>({Cout, Do, Ho, Wo});
  kernels::conv3d_forward<S>(input->data.data(), Cin, D, H, W, weights->data.data(), Cout, k, pad,
                             bias->data.data(), out->data.data());

  if (detail::want_grad<S>(g, {&input, &weights, &bias})) {
    out->requires_grad = true;
    g.record([input, weights, bias, out, Cin, D, H, W, Cout, k, pad, Do, Ho, Wo]() {
      if (!out->has_grad()) return;
      const S* go = out->grad.data();
      if (input->requires_grad) {
        auto wf = kernels::flip_weights<S>(weights->data.data(), Cout, Cin, k);
        input->ensure_grad();
        kernels::conv3d_backward_data<S>(go, Cout, Do, Ho, Wo, wf.data(), Cin, k, pad,
                                         input->grad.data(), /*accumulate=*/true);
      }
      if (weights->requires_grad) {
        weights->ensure_grad();
        kernels::conv3d_backward_weights<S>(input->data.data(), Cin, D, H, W, go, Cout, k, pad,
                                            weights->grad.data());
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        const int64_t V = Do * Ho * Wo;
        for (int64_t co = 0; co < Cout; ++co) {
          S s = 0;
          const S* p = go + co * V;
#pragma omp simd reduction(+ : s)
          for (int64_t i = 0; i < V; ++i) s += p[i];
          bias->grad[static_cast<size_t>(co)] += s;
        }
      }
    });
  }
  return out;
}

/// 2x2x2 transposed convolution with stride 2 (scatter-add into disjoint
/// blocks): input [Cin,D,H,W], weights [Cin,Cout,2,2,2] -> [Cout,2D,2H,2W].
template <class S>
TensorPtr<S> conv3d_transposed(Graph<S>& g, const TensorPtr<S>& input, const TensorPtr<S>& weights) {
  detail::expect_rank(input->shape, 4, "conv3d_transposed");
  detail::expect_rank(weights->shape, 5, "conv3d_transposed");
  const int64_t Cin = input->shape[0], D = input->shape[1], H = input->shape[2], W = input->shape[3];
  if (weights->shape[0] != Cin)
    throw ValueError(fmt::format("conv3d_transposed: input has {} channels (shape {}) but weights expect {} (shape {})",
                                 Cin, shape_str(input->shape), weights->shape[0], shape_str(weights->shape)));
  if (weights->shape[2] != 2 || weights->shape[3] != 2 || weights->shape[4] != 2)
    throw ValueError(fmt::format("conv3d_transposed: kernel must be 2x2x2, got weight shape {}",
                                 shape_str(weights->shape)));
  const int64_t Cout = weights->shape[1];

  auto out = make_tensor<S>({Cout, 2 * D, 2 * H, 2 * W});
  kernels::convt2_forward<S>(input->data.data(), Cin, D, H, W, weights->data.data(), Cout,
                             out->data.data());

  if (detail::want_grad<S>(g, {&input, &weights})) {
    out->requires_grad = true;
    g.record([input, weights, out, Cin, D, H, W, Cout]() {
      if (!out->has_grad()) return;
      const S* go = out->grad.data();
      if (input->requires_grad) {
        input->ensure_grad();
        kernels::conv3d_stride2_k2<S>(go, Cout, 2 * D, 2 * H, 2 * W, weights->data.data(), Cin,
                                      input->grad.data(), /*accumulate=*/true);
      }
      if (weights->requires_grad) {
        weights->ensure_grad();
        kernels::convt2_backward_weights<S>(input->data.data(), Cin, D, H, W, go, Cout,
                                            weights->grad.data());
      }
    });
  }
  return out;
}

template <class S>
struct MaxPool3dResult {
  TensorPtr<S> output;
  /// Per output element, the linear index of the winning input voxel.
  std::shared_ptr<std::vector<int64_t>> argmax;
};

/// 2x2x2 max pooling with stride 2. Requires even spatial extents. Gradient
/// flows only to the argmax voxel; ties break toward the lowest linear index.
template <class S>
MaxPool3dResult<S> maxpool3d(Graph<S>& g, const TensorPtr<S>& input) {
  detail::expect_rank(input->shape, 4, "maxpool3d");
  const int64_t C = input->shape[0], D = input->shape[1], H = input->shape[2], W = input->shape[3];
  if (D % 2 || H % 2 || W % 2)
    throw ValueError(fmt::format("maxpool3d: spatial extents must be even, got {}", shape_str(input->shape)));
  const int64_t Do = D / 2, Ho = H / 2, Wo = W / 2;

  auto out = make_tensor<S>({C, Do, Ho, Wo});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out->numel()));
  const S* in = input->data.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t zo = 0; zo < Do; ++zo) {
      for (int64_t yo = 0; yo < Ho; ++yo) {
        for (int64_t xo = 0; xo < Wo; ++xo) {
          S best = -std::numeric_limits<S>::infinity();
          int64_t best_idx = -1;
          for (int64_t a = 0; a < 2; ++a)
            for (int64_t b = 0; b < 2; ++b)
              for (int64_t e = 0; e < 2; ++e) {
                const int64_t idx = ((c * D + 2 * zo + a) * H + 2 * yo + b) * W + 2 * xo + e;
                if (in[idx] > best) {
                  best = in[idx];
                  best_idx = idx;
                }
              }
          const int64_t oidx = ((c * Do + zo) * Ho + yo) * Wo + xo;
          out->data[static_cast<size_t>(oidx)] = best;
          (*argmax)[static_cast<size_t>(oidx)] = best_idx;
        }
      }
    }
  }

  if (detail::want_grad<S>(g, {&input})) {
    out->requires_grad = true;
    g.record([input, out, argmax]() {
      if (!out->has_grad() || !input->requires_grad) return;
      input->ensure_grad();
      const auto& am = *argmax;
      for (size_t i = 0; i < am.size(); ++i)
        input->grad[static_cast<size_t>(am[i])] += out->grad[i];
    });
  }
  return {out, argmax};
}

/// Elementwise max(0, x). Subgradient at exactly 0 is 0.
template <class S>
TensorPtr<S> relu(Graph<S>& g, const TensorPtr<S>& input) {
  auto out = make_tensor<S>(input->shape);
  const int64_t n = input->numel();
  const S* in = input->data.data();
  S* o = out->data.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) o[i] = in[i] > S(0) ? in[i] : S(0);

  if (detail::want_grad<S>(g, {&input})) {
    out->requires_grad = true;
    g.record([input, out, n]() {
      if (!out->has_grad() || !input->requires_grad) return;
      input->ensure_grad();
      const S* x = input->data.data();
      const S* go = out->grad.data();
      S* gi = input->grad.data();
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < n; ++i)
        if (x[i] > S(0)) gi[i] += go[i];
    });
  }
  return out;
}

/// Stack b's channels after a's. Spatial extents must match exactly.
template <class S>
TensorPtr<S> concat_channels(Graph<S>& g, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  detail::expect_rank(a->shape, 4, "concat_channels");
  detail::expect_rank(b->shape, 4, "concat_channels");
  for (size_t i = 1; i < 4; ++i)
    if (a->shape[i] != b->shape[i])
      throw ValueError(fmt::format("concat_channels: spatial extents differ, {} vs {}",
                                   shape_str(a->shape), shape_str(b->shape)));
  const int64_t Ca = a->shape[0], Cb = b->shape[0];
  auto out = make_tensor<S>({Ca + Cb, a->shape[1], a->shape[2], a->shape[3]});
  const int64_t na = a->numel(), nb = b->numel();
  std::copy(a->data.begin(), a->data.end(), out->data.begin());
  std::copy(b->data.begin(), b->data.end(), out->data.begin() + na);

  if (detail::want_grad<S>(g, {&a, &b})) {
    out->requires_grad = true;
    g.record([a, b, out, na, nb]() {
      if (!out->has_grad()) return;
      const S* go = out->grad.data();
      if (a->requires_grad) a->accumulate_grad(go, na);
      if (b->requires_grad) b->accumulate_grad(go + na, nb);
    });
  }
  return out;
}

/// Per-voxel softmax across the channel axis, stabilized by max subtraction.
template <class S>
TensorPtr<S> softmax_channels(Graph<S>& g, const TensorPtr<S>& input) {
  detail::expect_rank(input->shape, 4, "softmax_channels");
  const int64_t C = input->shape[0], D = input->shape[1], H = input->shape[2], W = input->shape[3];
  const int64_t V = D * H * W;
  auto out = make_tensor<S>(input->shape);
  const S* in = input->data.data();
  S* o = out->data.data();
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < D * H; ++r) {
    std::vector<S> m(static_cast<size_t>(W), -std::numeric_limits<S>::infinity());
    std::vector<S> s(static_cast<size_t>(W), S(0));
    const int64_t row = r * W;
    for (int64_t c = 0; c < C; ++c) {
      const S* p = in + c * V + row;
      for (int64_t x = 0; x < W; ++x) m[x] = std::max(m[x], p[x]);
    }
    for (int64_t c = 0; c < C; ++c) {
      const S* p = in + c * V + row;
      S* q = o + c * V + row;
      for (int64_t x = 0; x < W; ++x) {
        q[x] = std::exp(p[x] - m[x]);
        s[x] += q[x];
      }
    }
    for (int64_t c = 0; c < C; ++c) {
      S* q = o + c * V + row;
      for (int64_t x = 0; x < W; ++x) q[x] /= s[x];
    }
  }

  if (detail::want_grad<S>(g, {&input})) {
    out->requires_grad = true;
    g.record([input, out, C, V, W, D, H]() {
      if (!out->has_grad() || !input->requires_grad) return;
      input->ensure_grad();
      const S* y = out->data.data();
      const S* go = out->grad.data();
      S* gi = input->grad.data();
#pragma omp parallel for schedule(static)
      for (int64_t r = 0; r < D * H; ++r) {
        std::vector<S> dot(static_cast<size_t>(W), S(0));
        const int64_t row = r * W;
        for (int64_t c = 0; c < C; ++c) {
          const S* yv = y + c * V + row;
          const S* gv = go + c * V + row;
          for (int64_t x = 0; x < W; ++x) dot[x] += yv[x] * gv[x];
        }
        for (int64_t c = 0; c < C; ++c) {
          const S* yv = y + c * V + row;
          const S* gv = go + c * V + row;
          S* giv = gi + c * V + row;
          for (int64_t x = 0; x < W; ++x) giv[x] += yv[x] * (gv[x] - dot[x]);
        }
      }
    });
  }
  return out;
}

inline constexpr double kLogClamp = 1e-12;

/// Mean over voxels of -log p(target class), with probabilities clamped at
/// 1e-12 before the log. Optional per-class weights turn the mean into a
/// weight-normalized sum. Labels are the flattened [D,H,W] grid.
template <class S>
TensorPtr<S> cross_entropy_loss(Graph<S>& g, const TensorPtr<S>& probs,
                                std::span<const uint8_t> labels,
                                std::span<const S> class_weights = {}) {
  detail::expect_rank(probs->shape, 4, "cross_entropy_loss");
  const int64_t C = probs->shape[0], D = probs->shape[1], H = probs->shape[2], W = probs->shape[3];
  const int64_t V = D * H * W;
  if (static_cast<int64_t>(labels.size()) != V)
    throw ValueError(fmt::format("cross_entropy_loss: {} labels for {} voxels", labels.size(), V));
  if (!class_weights.empty() && static_cast<int64_t>(class_weights.size()) != C)
    throw ValueError(fmt::format("cross_entropy_loss: {} class weights for {} classes",
                                 class_weights.size(), C));
  const S* p = probs->data.data();
  double num = 0.0, den = 0.0;
  for (int64_t v = 0; v < V; ++v) {
    const int64_t t = labels[static_cast<size_t>(v)];
    if (t >= C) {
      const int64_t z = v / (H * W), y = (v / W) % H, x = v % W;
      throw ValueError(fmt::format("cross_entropy_loss: label {} out of range [0,{}) at voxel (z={},y={},x={})",
                                   t, C, z, y, x));
    }
    const double w = class_weights.empty() ? 1.0 : static_cast<double>(class_weights[static_cast<size_t>(t)]);
    const double pv = std::max(static_cast<double>(p[t * V + v]), kLogClamp);
    num += w * -std::log(pv);
    den += w;
  }
  if (den <= 0.0) throw ValueError("cross_entropy_loss: total weight is zero");
  auto out = make_scalar<S>(static_cast<S>(num / den));

  if (detail::want_grad<S>(g, {&probs})) {
    out->requires_grad = true;
    auto labels_copy = std::make_shared<std::vector<uint8_t>>(labels.begin(), labels.end());
    auto weights_copy = std::make_shared<std::vector<S>>(class_weights.begin(), class_weights.end());
    g.record([probs, out, labels_copy, weights_copy, C, V, den]() {
      if (!out->has_grad() || !probs->requires_grad) return;
      probs->ensure_grad();
      const S go = out->grad[0];
      const S* p = probs->data.data();
      S* gp = probs->grad.data();
      const auto& lab = *labels_copy;
      const auto& cw = *weights_copy;
      for (int64_t v = 0; v < V; ++v) {
        const int64_t t = lab[static_cast<size_t>(v)];
        const double pv = static_cast<double>(p[t * V + v]);
        if (pv < kLogClamp) continue;  // inside the clamp, d(log)/dp = 0
        const double w = cw.empty() ? 1.0 : static_cast<double>(cw[static_cast<size_t>(t)]);
        gp[t * V + v] += static_cast<S>(-w / (den * pv)) * go;
      }
    });
  }
  return out;
}

/// Sum of all elements as a scalar.
template <class S>
TensorPtr<S> sum(Graph<S>& g, const TensorPtr<S>& x) {
  double s = 0.0;
  for (S v : x->data) s += static_cast<double>(v);
  auto out = make_scalar<S>(static_cast<S>(s));
  if (detail::want_grad<S>(g, {&x})) {
    out->requires_grad = true;
    g.record([x, out]() {
      if (!out->has_grad() || !x->requires_grad) return;
      x->ensure_grad();
      const S go = out->grad[0];
      for (auto& gv : x->grad) gv += go;
    });
  }
  return out;
}

/// Elementwise product.
template <class S>
TensorPtr<S> mul(Graph<S>& g, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->shape != b->shape)
    throw ValueError(fmt::format("mul: shapes differ, {} vs {}", shape_str(a->shape), shape_str(b->shape)));
  auto out = make_tensor<S>(a->shape);
  const int64_t n = a->numel();
  for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
  if (detail::want_grad<S>(g, {&a, &b})) {
    out->requires_grad = true;
    g.record([a, b, out, n]() {
      if (!out->has_grad()) return;
      const S* go = out->grad.data();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < n; ++i) a->grad[i] += go[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < n; ++i) b->grad[i] += go[i] * a->data[i];
      }
    });
  }
  return out;
}

}  // namespace petseg
