#include <doctest.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "petseg/config.hpp"

#include "support.hpp"

using namespace petseg;

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults are the documented desk-scale setup") {
  auto cfg = RunConfig::defaults();
  CHECK(cfg.unet.base_channels == 8);
  CHECK(cfg.unet.in_channels == 1);
  CHECK(cfg.unet.num_classes == 31);
  CHECK(cfg.phantom.dims == std::array<int64_t, 3>{64, 64, 64});
  CHECK(cfg.positivity_threshold == 1.11);
  CHECK(cfg.regions_path.empty());
  CHECK(cfg.train.patience == 10);
  CHECK(cfg.train.batch_size == 1);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("dump is canonical: parse(dump) dumps byte-identically") {
  auto cfg = RunConfig::defaults();
  const std::string first = cfg.dump();
  auto reparsed = RunConfig::parse(first, "inline");
  CHECK(reparsed.dump() == first);

  // a modified config round-trips too
  cfg.train.lr = 5e-4;
  cfg.train.seed = 99;
  cfg.phantom.dims = {32, 48, 64};
  cfg.positivity_threshold = 1.25;
  cfg.train.class_weighting = false;
  const std::string second = cfg.dump();
  CHECK(RunConfig::parse(second, "inline").dump() == second);
  CHECK(second != first);
}

TEST_CASE("dump lists every key once, alphabetically") {
  const std::string text = RunConfig::defaults().dump();
  std::vector<std::string> keys;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    auto key = line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    keys.push_back(key);
  }
  CHECK(keys.size() == 21);
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
  CHECK(keys.front() == "metrics.threshold");
  CHECK(keys.back() == "unet.num_classes");
}

TEST_CASE("comments, blank lines and spacing are ignored") {
  const std::string text =
      "# run setup\n"
      "\n"
      "  train.lr=0.002   # aggressive\n"
      "\ttrain.seed =\t7\n"
      "phantom.dims = 32 , 32 ,32\n";
  auto cfg = RunConfig::parse(text, "inline");
  CHECK(cfg.train.lr == 0.002);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.phantom.dims == std::array<int64_t, 3>{32, 32, 32});
  // untouched keys keep their defaults
  CHECK(cfg.train.patience == 10);
  CHECK(cfg.unet.base_channels == 8);
}

TEST_CASE("parse errors carry the origin and line number") {
  CHECK_THROWS_WITH_AS(RunConfig::parse("train.cadence = 3\n", "run.cfg"),
                       doctest::Contains("run.cfg:1"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("train.cadence = 3\n", "run.cfg"),
                       doctest::Contains("unknown key \"train.cadence\""), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("\n\ntrain.lr\n", "run.cfg"),
                       doctest::Contains("run.cfg:3"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("train.lr = fast\n", "run.cfg"),
                       doctest::Contains("cannot parse \"fast\""), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("train.class_weighting = yes\n", "run.cfg"),
                       doctest::Contains("expected true/false"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("phantom.dims = 32,32\n", "run.cfg"),
                       doctest::Contains("expected 3 comma-separated values, got 2"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("train.lr = 0.1\ntrain.lr = 0.2\n", "run.cfg"),
                       doctest::Contains("already set on line 1"), ConfigError);
}

TEST_CASE("semantic validation failures are config errors") {
  CHECK_THROWS_AS(RunConfig::parse("train.batch_size = 2\n", "inline"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("phantom.dims = 16,16,16\n", "inline"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("phantom.noise_sigma = -0.1\n", "inline"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("metrics.threshold = 0\n", "inline"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("train.split = 0.5,0.25,0.5\n", "inline"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("unet.num_classes = 1\n", "inline"), ConfigError);
}

TEST_CASE("file round trip") {
  testutil::TempDir dir("config");
  const std::string path = dir.file("run.cfg");
  auto cfg = RunConfig::defaults();
  cfg.train.max_epochs = 17;
  cfg.regions_path = "custom/regions.txt";
  {
    std::ofstream out(path, std::ios::binary);
    out << cfg.dump();
  }
  auto loaded = RunConfig::from_file(path);
  CHECK(loaded.train.max_epochs == 17);
  CHECK(loaded.regions_path == "custom/regions.txt");
  CHECK(loaded.dump() == cfg.dump());

  CHECK_THROWS_AS(RunConfig::from_file(dir.file("absent.cfg")), IoError);
}

TEST_CASE("empty string values survive the round trip") {
  auto cfg = RunConfig::defaults();
  CHECK(cfg.regions_path.empty());
  const std::string text = cfg.dump();
  CHECK(text.find("paths.regions =\n") != std::string::npos);
  CHECK(RunConfig::parse(text, "inline").regions_path.empty());
}

TEST_SUITE_END();
