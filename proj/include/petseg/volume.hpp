#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "petseg/common.hpp"

namespace petseg {

/// Orientation fields carried through file round trips untouched. The voxel
/// grids are assumed pre-aligned to a common space, so nothing here is ever
/// interpreted.
struct NiftiOrientation {
  int16_t qform_code = 0;
  int16_t sform_code = 0;
  std::array<float, 3> quatern{0, 0, 0};   // b, c, d
  std::array<float, 3> qoffset{0, 0, 0};   // x, y, z
  std::array<float, 12> srow{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  uint8_t xyzt_units = 0;
};

constexpr int kNumRegions = 30;

/// 3D scalar grid of tracer uptake (SUV, dimensionless). dims are [D, H, W]
/// with W contiguous; spacing_mm matches that order.
struct Volume {
  std::array<int64_t, 3> dims{0, 0, 0};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::vector<float> data;
  NiftiOrientation orientation;

  int64_t numel() const { return dims[0] * dims[1] * dims[2]; }
  float& at(int64_t z, int64_t y, int64_t x) { return data[(z * dims[1] + y) * dims[2] + x]; }
  float at(int64_t z, int64_t y, int64_t x) const { return data[(z * dims[1] + y) * dims[2] + x]; }

  /// dims all >= 8, data length D*H*W, all values finite.
  void validate() const;
};

/// Integer grid of region labels 0..30 (0 = background), aligned voxel for
/// voxel with its paired Volume.
struct LabelMap {
  std::array<int64_t, 3> dims{0, 0, 0};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::vector<uint8_t> data;
  NiftiOrientation orientation;

  int64_t numel() const { return dims[0] * dims[1] * dims[2]; }
  uint8_t& at(int64_t z, int64_t y, int64_t x) { return data[(z * dims[1] + y) * dims[2] + x]; }
  uint8_t at(int64_t z, int64_t y, int64_t x) const { return data[(z * dims[1] + y) * dims[2] + x]; }

  /// data length D*H*W, every value in 0..30.
  void validate() const;
};

/// Gate in front of SubjectRecord construction: equal dims, spacing equal
/// within 1e-6 mm, labels in range. Alignment itself is assumed, never
/// computed.
void validate_pair(const Volume& pet, const LabelMap& labels);

}  // namespace petseg
