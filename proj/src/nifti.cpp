#include "petseg/nifti.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <type_traits>
#include <vector>

#include <fmt/format.h>

#include "petseg/common.hpp"

namespace petseg {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax;
  int32_t glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code;
  int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must pack to 348 bytes");

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtInt32 = 8;
constexpr int16_t kDtFloat32 = 16;
constexpr int16_t kDtFloat64 = 64;

void swap_bytes(int16_t& v) {
  uint16_t u;
  std::memcpy(&u, &v, 2);
  u = __builtin_bswap16(u);
  std::memcpy(&v, &u, 2);
}

void swap_bytes(int32_t& v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&v, &u, 4);
}

void swap_bytes(float& v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&v, &u, 4);
}

void swap_bytes(double& v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  u = __builtin_bswap64(u);
  std::memcpy(&v, &u, 8);
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  swap_bytes(h.extents);
  swap_bytes(h.session_error);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.intent_p1);
  swap_bytes(h.intent_p2);
  swap_bytes(h.intent_p3);
  swap_bytes(h.intent_code);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  swap_bytes(h.slice_start);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
  swap_bytes(h.slice_end);
  swap_bytes(h.cal_max);
  swap_bytes(h.cal_min);
  swap_bytes(h.slice_duration);
  swap_bytes(h.toffset);
  swap_bytes(h.glmax);
  swap_bytes(h.glmin);
  swap_bytes(h.qform_code);
  swap_bytes(h.sform_code);
  swap_bytes(h.quatern_b);
  swap_bytes(h.quatern_c);
  swap_bytes(h.quatern_d);
  swap_bytes(h.qoffset_x);
  swap_bytes(h.qoffset_y);
  swap_bytes(h.qoffset_z);
  for (auto& s : h.srow_x) swap_bytes(s);
  for (auto& s : h.srow_y) swap_bytes(s);
  for (auto& s : h.srow_z) swap_bytes(s);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int bytes_per_voxel(int16_t datatype) {
  switch (datatype) {
    case kDtUint8:
      return 1;
    case kDtInt16:
      return 2;
    case kDtInt32:
      return 4;
    case kDtFloat32:
      return 4;
    case kDtFloat64:
      return 8;
    default:
      return 0;
  }
}

template <typename T>
std::vector<T> read_raw(std::FILE* f, int64_t count, bool swapped, const std::string& path) {
  std::vector<T> buf(static_cast<size_t>(count));
  if (count > 0 && std::fread(buf.data(), sizeof(T), buf.size(), f) != buf.size())
    throw IoError(fmt::format("{}: unexpected end of file while reading voxel data", path));
  if constexpr (sizeof(T) > 1) {
    if (swapped)
      for (auto& v : buf) swap_bytes(v);
  }
  return buf;
}

NiftiOrientation orientation_from_header(const Nifti1Header& h) {
  NiftiOrientation o;
  o.qform_code = h.qform_code;
  o.sform_code = h.sform_code;
  o.quatern[0] = h.quatern_b;
  o.quatern[1] = h.quatern_c;
  o.quatern[2] = h.quatern_d;
  o.qoffset[0] = h.qoffset_x;
  o.qoffset[1] = h.qoffset_y;
  o.qoffset[2] = h.qoffset_z;
  for (int i = 0; i < 4; ++i) {
    o.srow[i] = h.srow_x[i];
    o.srow[4 + i] = h.srow_y[i];
    o.srow[8 + i] = h.srow_z[i];
  }
  o.xyzt_units = h.xyzt_units;
  return o;
}

void orientation_to_header(const NiftiOrientation& o, Nifti1Header& h) {
  h.qform_code = o.qform_code;
  h.sform_code = o.sform_code;
  h.quatern_b = o.quatern[0];
  h.quatern_c = o.quatern[1];
  h.quatern_d = o.quatern[2];
  h.qoffset_x = o.qoffset[0];
  h.qoffset_y = o.qoffset[1];
  h.qoffset_z = o.qoffset[2];
  for (int i = 0; i < 4; ++i) {
    h.srow_x[i] = o.srow[i];
    h.srow_y[i] = o.srow[4 + i];
    h.srow_z[i] = o.srow[8 + i];
  }
  h.xyzt_units = o.xyzt_units;
}

Nifti1Header make_header(const std::array<int64_t, 3>& dims,
                         const std::array<double, 3>& spacing_mm,
                         const NiftiOrientation& orientation, int16_t datatype) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<int16_t>(dims[2]);
  h.dim[2] = static_cast<int16_t>(dims[1]);
  h.dim[3] = static_cast<int16_t>(dims[0]);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = datatype;
  h.bitpix = static_cast<int16_t>(bytes_per_voxel(datatype) * 8);
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = static_cast<float>(spacing_mm[2]);
  h.pixdim[2] = static_cast<float>(spacing_mm[1]);
  h.pixdim[3] = static_cast<float>(spacing_mm[0]);
  for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  orientation_to_header(orientation, h);
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void write_file(const Nifti1Header& header, const void* data, size_t data_bytes,
                const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError(fmt::format("{}: cannot open for writing", path));
  const char extension[4] = {0, 0, 0, 0};
  if (std::fwrite(&header, sizeof(header), 1, f.get()) != 1 ||
      std::fwrite(extension, sizeof(extension), 1, f.get()) != 1 ||
      (data_bytes > 0 && std::fwrite(data, 1, data_bytes, f.get()) != data_bytes))
    throw IoError(fmt::format("{}: write failed", path));
  if (std::fflush(f.get()) != 0)
    throw IoError(fmt::format("{}: write failed", path));
}

}  // namespace

std::variant<Volume, LabelMap> read_nifti(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError(fmt::format("{}: cannot open for reading", path));

  Nifti1Header h;
  if (std::fread(&h, sizeof(h), 1, f.get()) != 1)
    throw IoError(fmt::format("{}: file shorter than a NIfTI-1 header", path));

  bool swapped = false;
  if (h.dim[0] < 1 || h.dim[0] > 7) {
    swap_header(h);
    swapped = true;
    if (h.dim[0] < 1 || h.dim[0] > 7)
      throw IoError(fmt::format("{}: not a NIfTI-1 file (dim[0] invalid in either byte order)", path));
  }

  if (std::memcmp(h.magic, "ni1", 4) == 0)
    throw IoError(fmt::format("{}: detached header/data pairs (.hdr/.img) are not supported", path));
  if (std::memcmp(h.magic, "n+1", 4) != 0)
    throw IoError(fmt::format("{}: bad magic, expected single-file NIfTI-1 (\"n+1\")", path));

  for (int i = 4; i <= h.dim[0]; ++i)
    if (h.dim[i] > 1)
      throw IoError(fmt::format("{}: only 3-D images are supported, dim[{}]={}", path, i, h.dim[i]));
  if (h.dim[0] < 3 || h.dim[1] < 1 || h.dim[2] < 1 || h.dim[3] < 1)
    throw IoError(fmt::format("{}: expected a 3-D image, got dim=[{},{},{},{}]", path, h.dim[0],
                              h.dim[1], h.dim[2], h.dim[3]));

  const int bpv = bytes_per_voxel(h.datatype);
  if (bpv == 0)
    throw IoError(fmt::format(
        "{}: unsupported datatype code {} (supported: uint8, int16, int32, float32, float64)", path,
        h.datatype));

  const std::array<int64_t, 3> dims = {h.dim[3], h.dim[2], h.dim[1]};
  const int64_t nvox = dims[0] * dims[1] * dims[2];

  const int64_t offset = static_cast<int64_t>(h.vox_offset);
  if (offset < 348)
    throw IoError(fmt::format("{}: vox_offset {} lies inside the header", path, offset));

  if (std::fseek(f.get(), 0, SEEK_END) != 0)
    throw IoError(fmt::format("{}: seek failed", path));
  const int64_t file_size = std::ftell(f.get());
  if (file_size != offset + nvox * bpv)
    throw IoError(fmt::format("{}: file size {} does not match header ({} bytes expected for "
                              "{}x{}x{} voxels at offset {})",
                              path, file_size, offset + nvox * bpv, h.dim[1], h.dim[2], h.dim[3],
                              offset));
  if (std::fseek(f.get(), static_cast<long>(offset), SEEK_SET) != 0)
    throw IoError(fmt::format("{}: seek failed", path));

  const bool has_scaling = h.scl_slope != 0.0f;
  const double slope = has_scaling ? static_cast<double>(h.scl_slope) : 1.0;
  const double inter = has_scaling ? static_cast<double>(h.scl_inter) : 0.0;

  std::array<double, 3> spacing = {h.pixdim[3], h.pixdim[2], h.pixdim[1]};
  for (auto& s : spacing)
    if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;

  std::vector<double> raw(static_cast<size_t>(nvox));
  bool integral = false;
  switch (h.datatype) {
    case kDtUint8: {
      auto buf = read_raw<uint8_t>(f.get(), nvox, swapped, path);
      for (int64_t i = 0; i < nvox; ++i) raw[i] = buf[i];
      integral = true;
      break;
    }
    case kDtInt16: {
      auto buf = read_raw<int16_t>(f.get(), nvox, swapped, path);
      for (int64_t i = 0; i < nvox; ++i) raw[i] = buf[i];
      integral = true;
      break;
    }
    case kDtInt32: {
      auto buf = read_raw<int32_t>(f.get(), nvox, swapped, path);
      for (int64_t i = 0; i < nvox; ++i) raw[i] = buf[i];
      integral = true;
      break;
    }
    case kDtFloat32: {
      auto buf = read_raw<float>(f.get(), nvox, swapped, path);
      for (int64_t i = 0; i < nvox; ++i) raw[i] = buf[i];
      break;
    }
    case kDtFloat64: {
      auto buf = read_raw<double>(f.get(), nvox, swapped, path);
      for (int64_t i = 0; i < nvox; ++i) raw[i] = buf[i];
      break;
    }
    default:
      break;
  }

  const NiftiOrientation orientation = orientation_from_header(h);

  std::vector<double> scaled(static_cast<size_t>(nvox));
  for (int64_t i = 0; i < nvox; ++i) {
    const double v = raw[i] * slope + inter;
    if (!std::isfinite(v))
      throw IoError(fmt::format("{}: non-finite voxel value at linear index {}", path, i));
    scaled[static_cast<size_t>(i)] = v;
  }

  if (integral) {
    bool label_values = true;
    for (int64_t i = 0; i < nvox; ++i) {
      const double v = scaled[static_cast<size_t>(i)];
      if (v < 0.0 || v > static_cast<double>(kNumRegions) || v != std::floor(v)) {
        label_values = false;
        break;
      }
    }
    if (label_values) {
      LabelMap labels;
      labels.dims = dims;
      labels.spacing_mm = spacing;
      labels.orientation = orientation;
      labels.data.resize(static_cast<size_t>(nvox));
      for (int64_t i = 0; i < nvox; ++i)
        labels.data[static_cast<size_t>(i)] = static_cast<uint8_t>(scaled[static_cast<size_t>(i)]);
      return labels;
    }
  }

  Volume volume;
  volume.dims = dims;
  volume.spacing_mm = spacing;
  volume.orientation = orientation;
  volume.data.resize(static_cast<size_t>(nvox));
  for (int64_t i = 0; i < nvox; ++i)
    volume.data[static_cast<size_t>(i)] = static_cast<float>(scaled[static_cast<size_t>(i)]);
  return volume;
}

Volume read_nifti_volume(const std::string& path) {
  auto image = read_nifti(path);
  if (auto* volume = std::get_if<Volume>(&image)) return std::move(*volume);
  // Integer-coded images in label range still make sense as intensities.
  const auto& labels = std::get<LabelMap>(image);
  Volume volume;
  volume.dims = labels.dims;
  volume.spacing_mm = labels.spacing_mm;
  volume.orientation = labels.orientation;
  volume.data.assign(labels.data.begin(), labels.data.end());
  return volume;
}

LabelMap read_nifti_labelmap(const std::string& path) {
  auto image = read_nifti(path);
  if (auto* labels = std::get_if<LabelMap>(&image)) return std::move(*labels);
  throw IoError(fmt::format(
      "{}: not a label map (needs an integer datatype and integer values 0..{})", path,
      kNumRegions));
}

void write_nifti(const Volume& volume, const std::string& path) {
  volume.validate();
  for (int axis = 0; axis < 3; ++axis)
    if (volume.dims[axis] > std::numeric_limits<int16_t>::max())
      throw ValueError(fmt::format("volume dim {} of {} exceeds the NIfTI-1 extent limit", axis,
                                   volume.dims[axis]));
  Nifti1Header h = make_header(volume.dims, volume.spacing_mm, volume.orientation, kDtFloat32);
  write_file(h, volume.data.data(), volume.data.size() * sizeof(float), path);
}

void write_nifti(const LabelMap& labels, const std::string& path) {
  labels.validate();
  for (int axis = 0; axis < 3; ++axis)
    if (labels.dims[axis] < 1 || labels.dims[axis] > std::numeric_limits<int16_t>::max())
      throw ValueError(fmt::format("label map dim {} of {} is outside the NIfTI-1 extent range",
                                   axis, labels.dims[axis]));
  Nifti1Header h = make_header(labels.dims, labels.spacing_mm, labels.orientation, kDtUint8);
  write_file(h, labels.data.data(), labels.data.size(), path);
}

}  // namespace petseg
