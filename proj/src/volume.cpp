#include "petseg/volume.hpp"

#include <cmath>

#include <fmt/format.h>

namespace petseg {

void Volume::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (dims[i] < 8)
      throw ValueError(fmt::format("volume dims must all be >= 8, got [{},{},{}]", dims[0], dims[1], dims[2]));
    if (!(spacing_mm[i] > 0.0))
      throw ValueError(fmt::format("voxel spacing must be positive, got [{},{},{}]",
                                   spacing_mm[0], spacing_mm[1], spacing_mm[2]));
  }
  if (static_cast<int64_t>(data.size()) != numel())
    throw ValueError(fmt::format("volume holds {} voxels but dims [{},{},{}] imply {}",
                                 data.size(), dims[0], dims[1], dims[2], numel()));
  for (size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw ValueError(fmt::format("volume contains a non-finite value at linear index {}", i));
}

void LabelMap::validate() const {
  if (static_cast<int64_t>(data.size()) != numel())
    throw ValueError(fmt::format("label map holds {} voxels but dims [{},{},{}] imply {}",
                                 data.size(), dims[0], dims[1], dims[2], numel()));
  for (size_t i = 0; i < data.size(); ++i)
    if (data[i] > kNumRegions)
      throw ValueError(fmt::format("label {} at linear index {} outside the valid range 0..{}",
                                   data[i], i, kNumRegions));
}

void validate_pair(const Volume& pet, const LabelMap& labels) {
  pet.validate();
  if (pet.dims != labels.dims)
    throw ValueError(fmt::format("PET dims [{},{},{}] do not match label dims [{},{},{}]",
                                 pet.dims[0], pet.dims[1], pet.dims[2],
                                 labels.dims[0], labels.dims[1], labels.dims[2]));
  for (int i = 0; i < 3; ++i)
    if (std::abs(pet.spacing_mm[i] - labels.spacing_mm[i]) > 1e-6)
      throw ValueError(fmt::format("PET spacing {} mm differs from label spacing {} mm on axis {}",
                                   pet.spacing_mm[i], labels.spacing_mm[i], i));
  labels.validate();
}

}  // namespace petseg
