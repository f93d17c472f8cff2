#include "petseg/unet.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace petseg {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'E', 'G', 'U', 'N', 'E', 'T'};
constexpr uint32_t kVersion = 1;

void push_conv(std::vector<ParamSpec>& out, const std::string& name, int64_t cout, int64_t cin, int64_t k) {
  out.push_back({name + ".weight", {cout, cin, k, k, k}, cin * k * k * k});
  out.push_back({name + ".bias", {cout}, 0});
}

}  // namespace

std::vector<ParamSpec> unet_param_layout(const UNetConfig& config) {
  config.validate();
  const int64_t b = config.base_channels;
  const int64_t k = UNetConfig::level_kernel;
  const int64_t kb = UNetConfig::bottleneck_kernel;
  std::vector<ParamSpec> layout;

  int64_t prev = config.in_channels;
  for (int level = 1; level <= UNetConfig::levels; ++level) {
    const int64_t ch = b << (level - 1);
    push_conv(layout, fmt::format("enc{}.conv1", level), ch, prev, k);
    push_conv(layout, fmt::format("enc{}.conv2", level), ch, ch, k);
    prev = ch;
  }

  const int64_t bott = b * 16;
  push_conv(layout, "bottleneck.conv1", bott, prev, kb);
  push_conv(layout, "bottleneck.conv2", bott, bott, kb);

  int64_t carry = bott;
  for (int level = UNetConfig::levels - 1; level >= 1; --level) {
    const int64_t skip = b << (level - 1);
    const int64_t up_out = carry / 2;
    // transposed conv: [Cin, Cout, 2, 2, 2], one tap per input channel
    layout.push_back({fmt::format("dec{}.up.weight", level), {carry, up_out, 2, 2, 2}, carry});
    push_conv(layout, fmt::format("dec{}.conv1", level), skip, up_out + skip, k);
    push_conv(layout, fmt::format("dec{}.conv2", level), skip, skip, k);
    carry = skip;
  }

  push_conv(layout, "final", config.num_classes, b, 1);
  return layout;
}

int64_t unet_parameter_count(const UNetConfig& config) {
  int64_t total = 0;
  for (const auto& spec : unet_param_layout(config)) total += shape_numel(spec.shape);
  return total;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

template <class T>
void write_raw(std::FILE* f, const T* v, size_t n, const std::string& path) {
  if (std::fwrite(v, sizeof(T), n, f) != n)
    throw IoError(fmt::format("write failure on '{}'", path));
}

template <class T>
void read_raw(std::FILE* f, T* v, size_t n, const std::string& path) {
  if (std::fread(v, sizeof(T), n, f) != n)
    throw IoError(fmt::format("truncated weight file '{}'", path));
}

}  // namespace

void save_weights(const UNetModel<float>& model, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path));
  write_raw(f.get(), kMagic, 8, path);
  write_raw(f.get(), &kVersion, 1, path);
  const int32_t cfg[3] = {model.config.in_channels, model.config.num_classes, model.config.base_channels};
  write_raw(f.get(), cfg, 3, path);
  const uint32_t n_params = static_cast<uint32_t>(model.params.size());
  write_raw(f.get(), &n_params, 1, path);
  for (const auto& p : model.params) {
    const uint8_t rank = static_cast<uint8_t>(p->shape.size());
    write_raw(f.get(), &rank, 1, path);
    write_raw(f.get(), p->shape.data(), p->shape.size(), path);
    write_raw(f.get(), p->data.data(), p->data.size(), path);
  }
  if (std::fflush(f.get()) != 0) throw IoError(fmt::format("write failure on '{}'", path));
}

UNetModel<float> load_weights(const std::string& path, const UNetConfig* expected) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError(fmt::format("cannot open weight file '{}'", path));
  char magic[8];
  read_raw(f.get(), magic, 8, path);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError(fmt::format("'{}' is not a weight file (bad magic)", path));
  uint32_t version = 0;
  read_raw(f.get(), &version, 1, path);
  if (version != kVersion)
    throw IoError(fmt::format("weight file '{}' has unsupported version {}", path, version));
  int32_t cfg[3];
  read_raw(f.get(), cfg, 3, path);
  UNetConfig config;
  config.in_channels = cfg[0];
  config.num_classes = cfg[1];
  config.base_channels = cfg[2];
  config.validate();
  if (expected && !(config == *expected))
    throw ConfigError(fmt::format(
        "weight file '{}' holds (in={}, classes={}, base={}) but (in={}, classes={}, base={}) was requested",
        path, config.in_channels, config.num_classes, config.base_channels,
        expected->in_channels, expected->num_classes, expected->base_channels));
  uint32_t n_params = 0;
  read_raw(f.get(), &n_params, 1, path);
  const auto layout = unet_param_layout(config);
  if (n_params != layout.size())
    throw IoError(fmt::format("weight file '{}' holds {} tensors, topology needs {}", path, n_params, layout.size()));

  UNetModel<float> model;
  model.config = config;
  for (const auto& spec : layout) {
    uint8_t rank = 0;
    read_raw(f.get(), &rank, 1, path);
    if (rank != spec.shape.size())
      throw IoError(fmt::format("weight file '{}': tensor '{}' has rank {}, expected {}",
                                path, spec.name, rank, spec.shape.size()));
    std::vector<int64_t> shape(rank);
    read_raw(f.get(), shape.data(), rank, path);
    if (shape != spec.shape)
      throw IoError(fmt::format("weight file '{}': tensor '{}' has shape {}, expected {}",
                                path, spec.name, shape_str(shape), shape_str(spec.shape)));
    auto t = make_tensor<float>(shape, /*requires_grad=*/true);
    read_raw(f.get(), t->data.data(), t->data.size(), path);
    model.params.push_back(std::move(t));
  }
  // anything after the last tensor means the file was not written by us
  char extra;
  if (std::fread(&extra, 1, 1, f.get()) == 1)
    throw IoError(fmt::format("weight file '{}' has trailing bytes", path));
  return model;
}

}  // namespace petseg
