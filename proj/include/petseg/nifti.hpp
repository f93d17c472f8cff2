#pragma once

#include <string>
#include <variant>

#include "petseg/volume.hpp"

namespace petseg {

/// Parses a single-file NIfTI-1 image (.nii). Little- and big-endian files
/// are both accepted (byte order is detected from dim[0]); datatypes uint8,
/// int16, int32, float32 and float64 are supported; scl_slope/scl_inter are
/// applied when the slope is nonzero. A file whose datatype is integral and
/// whose scaled values are all integers in 0..30 is classified as a LabelMap,
/// everything else as a Volume.
std::variant<Volume, LabelMap> read_nifti(const std::string& path);

/// read_nifti with the result required to be a Volume / LabelMap.
Volume read_nifti_volume(const std::string& path);
LabelMap read_nifti_labelmap(const std::string& path);

/// Writes a single-file .nii: little-endian, float32 for volumes, uint8 for
/// label maps, vox_offset 352, scl_slope 1, scl_inter 0. Reading the file
/// back reproduces the input bit for bit.
void write_nifti(const Volume& volume, const std::string& path);
void write_nifti(const LabelMap& labels, const std::string& path);

}  // namespace petseg
