#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "petseg/unet.hpp"

#include "support.hpp"

using namespace petseg;

TEST_SUITE_BEGIN("unet");

TEST_CASE("parameter counts match hand-computed totals") {
  UNetConfig tiny{1, 3, 2};
  UNetConfig desk{1, 31, 8};
  CHECK(unet_parameter_count(tiny) == 218879);
  CHECK(unet_parameter_count(desk) == 3499727);
}

TEST_CASE("parameter layout walks encoder, bottleneck, decoder, head in order") {
  UNetConfig cfg{1, 31, 8};
  const auto layout = unet_param_layout(cfg);
  REQUIRE(layout.size() == 2 * 8 + 4 + 3 * 5 + 2);  // 8 convs enc, 2 bottleneck, 3x(up+2 convs), final
  CHECK(layout.front().name == "enc1.conv1.weight");
  CHECK(layout.front().shape == std::vector<int64_t>{8, 1, 3, 3, 3});
  CHECK(layout[2].name == "enc1.conv2.weight");

  // bottleneck doubles enc4 width and uses the wide kernel
  int bn = -1;
  for (size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name == "bottleneck.conv1.weight") bn = static_cast<int>(i);
  REQUIRE(bn >= 0);
  CHECK(layout[bn].shape == std::vector<int64_t>{128, 64, 5, 5, 5});

  // decoder upsamplers halve the carried width and take no bias
  int up3 = -1;
  for (size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name == "dec3.up.weight") up3 = static_cast<int>(i);
  REQUIRE(up3 >= 0);
  CHECK(layout[up3].shape == std::vector<int64_t>{128, 64, 2, 2, 2});
  CHECK(layout[up3 + 1].name == "dec3.conv1.weight");
  CHECK(layout[up3 + 1].shape == std::vector<int64_t>{32, 96, 3, 3, 3});  // 64 upsampled + 32 skip

  CHECK(layout[layout.size() - 2].name == "final.weight");
  CHECK(layout[layout.size() - 2].shape == std::vector<int64_t>{31, 8, 1, 1, 1});
  CHECK(layout.back().name == "final.bias");
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS((UNetConfig{0, 31, 8}.validate()), ValueError);
  CHECK_THROWS_AS((UNetConfig{1, 1, 8}.validate()), ValueError);
  CHECK_THROWS_AS((UNetConfig{1, 31, 0}.validate()), ValueError);
  CHECK_NOTHROW((UNetConfig{1, 2, 1}.validate()));
}

TEST_CASE("initialization is seeded and scaled by fan-in") {
  UNetConfig cfg{1, 3, 2};
  auto m1 = build_unet<float>(cfg, 99);
  auto m2 = build_unet<float>(cfg, 99);
  auto m3 = build_unet<float>(cfg, 100);
  REQUIRE(m1.params.size() == m2.params.size());
  bool differs = false;
  for (size_t i = 0; i < m1.params.size(); ++i) {
    CHECK(m1.params[i]->data == m2.params[i]->data);
    if (m1.params[i]->data != m3.params[i]->data) differs = true;
  }
  CHECK(differs);

  // biases start at zero; weight spread tracks sqrt(2/fan_in)
  const auto layout = unet_param_layout(cfg);
  for (size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].fan_in == 0) {
      for (float v : m1.params[i]->data) CHECK(v == 0.0f);
    } else if (m1.params[i]->numel() >= 512) {
      double s2 = 0;
      for (float v : m1.params[i]->data) s2 += static_cast<double>(v) * v;
      s2 /= static_cast<double>(m1.params[i]->numel());
      const double want = 2.0 / static_cast<double>(layout[i].fan_in);
      CHECK(s2 > 0.6 * want);
      CHECK(s2 < 1.5 * want);
    }
  }
}

TEST_CASE("forward pass emits per-voxel probabilities at input resolution") {
  UNetConfig cfg{1, 3, 2};
  auto model = build_unet<float>(cfg, 5);
  auto input = make_tensor<float>({1, 8, 8, 8});
  Rng rng(6);
  for (auto& v : input->data) v = static_cast<float>(rng.normal());
  Graph<float> g(false);
  auto out = unet_forward(g, model, input);
  CHECK(out->shape == std::vector<int64_t>{3, 8, 8, 8});
  const int64_t V = 512;
  for (int64_t v = 0; v < V; ++v) {
    float s = 0;
    for (int64_t c = 0; c < 3; ++c) s += out->data[c * V + v];
    CHECK(s == doctest::Approx(1.0f).epsilon(1e-5));
  }

  auto bad = make_tensor<float>({1, 12, 8, 8});
  CHECK_THROWS_AS(unet_forward(g, model, bad), ValueError);
  auto badc = make_tensor<float>({2, 8, 8, 8});
  CHECK_THROWS_AS(unet_forward(g, model, badc), ValueError);
}

TEST_CASE("weight files round trip and reject corruption") {
  testutil::TempDir dir("unet-io");
  UNetConfig cfg{1, 3, 2};
  auto model = build_unet<float>(cfg, 77);
  const std::string path = dir.file("model.bin");
  save_weights(model, path);

  auto loaded = load_weights(path);
  CHECK(loaded.config == cfg);
  REQUIRE(loaded.params.size() == model.params.size());
  for (size_t i = 0; i < model.params.size(); ++i) {
    CHECK(loaded.params[i]->shape == model.params[i]->shape);
    CHECK(loaded.params[i]->data == model.params[i]->data);
  }

  UNetConfig other{1, 31, 8};
  CHECK_THROWS_AS(load_weights(path, &other), ConfigError);
  CHECK_NOTHROW(load_weights(path, &cfg));
  CHECK_THROWS_AS(load_weights(dir.file("missing.bin")), IoError);

  // truncated file
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(dir.file("trunc.bin"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_weights(dir.file("trunc.bin")), IoError);

  // wrong magic
  {
    std::ofstream out(dir.file("junk.bin"), std::ios::binary);
    out << "NOTAWEIGHTFILE00000000000000000000000000";
  }
  CHECK_THROWS_AS(load_weights(dir.file("junk.bin")), IoError);
}

TEST_CASE("model_cast converts precision losslessly for float-representable values") {
  UNetConfig cfg{1, 3, 2};
  auto f = build_unet<float>(cfg, 13);
  auto d = model_cast<double>(f);
  auto f2 = model_cast<float>(d);
  for (size_t i = 0; i < f.params.size(); ++i) CHECK(f.params[i]->data == f2.params[i]->data);
}

TEST_CASE("clone copies values but not gradient state") {
  UNetConfig cfg{1, 3, 2};
  auto m = build_unet<float>(cfg, 1);
  m.params[0]->ensure_grad();
  auto c = m.clone();
  CHECK(c.params[0]->data == m.params[0]->data);
  CHECK_FALSE(c.params[0]->has_grad());
  c.params[0]->data[0] += 1.0f;
  CHECK(c.params[0]->data[0] != m.params[0]->data[0]);
}

TEST_CASE("tiny network full gradient check") {
  UNetConfig cfg{1, 3, 2};
  auto model = model_cast<double>(build_unet<float>(cfg, 21));
  model.set_requires_grad(true);
  auto input = make_tensor<double>({1, 8, 8, 8});
  Rng rng(22);
  for (auto& v : input->data) v = rng.normal();
  std::vector<uint8_t> labels(512);
  for (auto& l : labels) l = static_cast<uint8_t>(rng.uniform_int(0, 2));

  auto loss = [&](Graph<double>& g) {
    auto probs = unet_forward(g, model, input);
    return cross_entropy_loss(g, probs, std::span<const uint8_t>(labels));
  };
  CHECK(testutil::max_grad_rel_err(loss, model.params, 30, rng) < 1e-6);
}

TEST_SUITE_END();
