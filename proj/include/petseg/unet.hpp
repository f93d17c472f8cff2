#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petseg/adam.hpp"
#include "petseg/ops.hpp"
#include "petseg/rng.hpp"

namespace petseg {

/// Topology knobs for the symmetric 4-level encoder-decoder. Channel widths
/// run base*(1,2,4,8) down the encoder and base*16 at the bottleneck, so the
/// full-width network (base 64) carries 1024 bottleneck maps and the
/// desk-scale one (base 8) carries 128.
struct UNetConfig {
  int in_channels = 1;
  int num_classes = 31;
  int base_channels = 64;

  static constexpr int levels = 4;
  static constexpr int level_kernel = 3;
  static constexpr int bottleneck_kernel = 5;

  void validate() const {
    if (in_channels < 1) throw ValueError(fmt::format("UNetConfig: in_channels must be >= 1, got {}", in_channels));
    if (num_classes < 2) throw ValueError(fmt::format("UNetConfig: num_classes must be >= 2, got {}", num_classes));
    if (base_channels < 1) throw ValueError(fmt::format("UNetConfig: base_channels must be >= 1, got {}", base_channels));
  }
  bool operator==(const UNetConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  std::vector<int64_t> shape;
  int64_t fan_in;  // inputs summed per output element, drives He init
};

/// Parameter tensors in build order: 4 encoder levels x two 3x3x3 convs, two
/// 5x5x5 bottleneck convs, 3 decoder levels x (2x2x2 transposed conv + two
/// 3x3x3 convs), final 1x1x1 conv. Transposed convs carry no bias. Decoder
/// level i concatenates the upsample output (channels halved) with encoder
/// level i's skip, then reduces back to the encoder level's width.
std::vector<ParamSpec> unet_param_layout(const UNetConfig& config);

int64_t unet_parameter_count(const UNetConfig& config);

template <class S>
struct UNetModel {
  UNetConfig config;
  std::vector<TensorPtr<S>> params;

  UNetModel clone() const {
    UNetModel copy;
    copy.config = config;
    copy.params.reserve(params.size());
    for (const auto& p : params) {
      auto q = make_tensor<S>(p->shape, p->requires_grad);
      q->data = p->data;
      copy.params.push_back(std::move(q));
    }
    return copy;
  }

  void set_requires_grad(bool on) {
    for (auto& p : params) p->requires_grad = on;
  }

  void zero_grads() {
    for (auto& p : params) p->zero_grad();
  }
};

/// He-style initialization, std = sqrt(2 / fan_in), biases zero; parameters
/// are drawn in build order from one seeded stream.
template <class S>
UNetModel<S> build_unet(const UNetConfig& config, uint64_t seed) {
  config.validate();
  UNetModel<S> model;
  model.config = config;
  Rng rng(seed);
  for (const auto& spec : unet_param_layout(config)) {
    auto t = make_tensor<S>(spec.shape, /*requires_grad=*/true);
    if (spec.fan_in > 0) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(spec.fan_in));
      for (auto& v : t->data) v = static_cast<S>(rng.normal(0.0, stddev));
    }
    model.params.push_back(std::move(t));
  }
  return model;
}

template <class To, class From>
UNetModel<To> model_cast(const UNetModel<From>& m) {
  UNetModel<To> out;
  out.config = m.config;
  out.params.reserve(m.params.size());
  for (const auto& p : m.params) {
    auto q = make_tensor<To>(p->shape, p->requires_grad);
    for (size_t i = 0; i < p->data.size(); ++i) q->data[i] = static_cast<To>(p->data[i]);
    out.params.push_back(std::move(q));
  }
  return out;
}

/// Full forward pass: volume [in_channels, D, H, W] with D, H, W divisible by
/// 8 (three poolings) -> per-voxel class probabilities [num_classes, D, H, W].
template <class S>
TensorPtr<S> unet_forward(Graph<S>& g, const UNetModel<S>& model, const TensorPtr<S>& input) {
  const auto& cfg = model.config;
  detail::expect_rank(input->shape, 4, "unet_forward");
  if (input->shape[0] != cfg.in_channels)
    throw ValueError(fmt::format("unet_forward: expected {} input channels, got shape {}",
                                 cfg.in_channels, shape_str(input->shape)));
  for (size_t i = 1; i < 4; ++i)
    if (input->shape[i] % 8 != 0)
      throw ValueError(fmt::format("unet_forward: spatial extents must be divisible by 8, got {}",
                                   shape_str(input->shape)));

  size_t cursor = 0;
  auto next = [&]() -> const TensorPtr<S>& { return model.params.at(cursor++); };
  auto conv_block = [&](const TensorPtr<S>& x) {
    const auto& w = next();
    const auto& b = next();
    return relu(g, conv3d(g, x, w, b, Padding::same));
  };

  // Encoder: two convs per level, pool between levels.
  auto e1 = conv_block(conv_block(input));
  auto p1 = maxpool3d(g, e1).output;
  auto e2 = conv_block(conv_block(p1));
  auto p2 = maxpool3d(g, e2).output;
  auto e3 = conv_block(conv_block(p2));
  auto p3 = maxpool3d(g, e3).output;
  auto e4 = conv_block(conv_block(p3));

  // Bottleneck: two 5x5x5 convs at the coarsest resolution.
  auto bn = conv_block(conv_block(e4));

  // Decoder: upsample, concatenate the matching encoder skip, two convs.
  auto up3 = conv3d_transposed(g, bn, next());
  auto d3 = conv_block(conv_block(concat_channels(g, up3, e3)));
  auto up2 = conv3d_transposed(g, d3, next());
  auto d2 = conv_block(conv_block(concat_channels(g, up2, e2)));
  auto up1 = conv3d_transposed(g, d2, next());
  auto d1 = conv_block(conv_block(concat_channels(g, up1, e1)));

  const auto& fw = next();
  const auto& fb = next();
  auto logits = conv3d(g, d1, fw, fb, Padding::same);
  if (cursor != model.params.size())
    throw ValueError(fmt::format("unet_forward: consumed {} of {} parameters", cursor, model.params.size()));
  return softmax_channels(g, logits);
}

/// Weight file: magic, version, config, then parameter tensors in build
/// order, each preceded by its shape. Little-endian, float32. Round trips
/// bit-exactly.
void save_weights(const UNetModel<float>& model, const std::string& path);

/// Reads a weight file. When `expected` is given, its topology must match the
/// one recorded in the header.
UNetModel<float> load_weights(const std::string& path, const UNetConfig* expected = nullptr);

}  // namespace petseg
