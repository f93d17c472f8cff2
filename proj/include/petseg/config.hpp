#pragma once

#include <string>
#include <string_view>

#include "petseg/phantom.hpp"
#include "petseg/regions.hpp"
#include "petseg/train.hpp"
#include "petseg/unet.hpp"

namespace petseg {

/// Everything a run needs, read from a plain-text key=value file. Every key
/// has a default; unknown keys are errors; `dump()` is canonical, so parsing
/// a dump and dumping again reproduces it byte for byte.
struct RunConfig {
  PhantomSpec phantom = PhantomSpec::defaults();
  UNetConfig unet;
  TrainConfig train;
  double positivity_threshold = 1.11;
  std::string regions_path;  // empty = built-in region table

  static RunConfig defaults();
  static RunConfig parse(std::string_view text, const std::string& origin);
  static RunConfig from_file(const std::string& path);

  std::string dump() const;
  RegionTable region_table() const;
  void validate() const;
};

}  // namespace petseg
