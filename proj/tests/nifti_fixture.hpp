#pragma once

// Raw NIfTI-1 fixture builder shared by the unit tests and the acceptance
// gate. Independent of the library's writer: pokes fields into a raw
// 352-byte header at the offsets fixed by the NIfTI-1 standard.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

struct RawNifti {
  std::vector<unsigned char> bytes = std::vector<unsigned char>(352, 0);

  template <class T>
  void poke(size_t offset, T value) {
    std::memcpy(bytes.data() + offset, &value, sizeof(T));
  }

  RawNifti(int16_t nx, int16_t ny, int16_t nz, int16_t datatype, int16_t bitpix,
           float sx = 1.0f, float sy = 1.0f, float sz = 1.0f) {
    poke<int32_t>(0, 348);
    poke<int16_t>(40, 3);  // dim[0]
    poke<int16_t>(42, nx);
    poke<int16_t>(44, ny);
    poke<int16_t>(46, nz);
    for (size_t i = 4; i < 8; ++i) poke<int16_t>(40 + 2 * i, 1);
    poke<int16_t>(70, datatype);
    poke<int16_t>(72, bitpix);
    poke<float>(76, 1.0f);
    poke<float>(80, sx);
    poke<float>(84, sy);
    poke<float>(88, sz);
    poke<float>(108, 352.0f);  // vox_offset
    poke<float>(112, 1.0f);    // scl_slope
    poke<float>(116, 0.0f);    // scl_inter
    std::memcpy(bytes.data() + 344, "n+1", 4);
  }

  template <class T>
  void append_voxels(const std::vector<T>& voxels) {
    const auto* p = reinterpret_cast<const unsigned char*>(voxels.data());
    bytes.insert(bytes.end(), p, p + voxels.size() * sizeof(T));
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }

  /// Byte-swapped twin: every multibyte header field and every voxel swapped.
  RawNifti swapped(int voxel_bytes) const {
    RawNifti copy = *this;
    auto swap_at = [&](size_t off, size_t size) {
      for (size_t i = 0; i < size / 2; ++i)
        std::swap(copy.bytes[off + i], copy.bytes[off + size - 1 - i]);
    };
    // int32 / float fields of the standard header
    for (size_t off : {0u, 32u, 108u, 112u, 116u, 120u, 124u, 140u, 144u}) swap_at(off, 4);
    for (size_t i = 0; i < 8; ++i) swap_at(40 + 2 * i, 2);   // dim
    for (size_t i = 0; i < 8; ++i) swap_at(76 + 4 * i, 4);   // pixdim
    for (size_t off : {36u, 68u, 70u, 72u, 74u, 252u, 254u}) swap_at(off, 2);
    for (size_t off = 256; off < 344; off += 4) swap_at(off, 4);  // quatern/qoffset/srow/intent
    for (size_t off = 352; off < copy.bytes.size(); off += static_cast<size_t>(voxel_bytes))
      swap_at(off, static_cast<size_t>(voxel_bytes));
    return copy;
  }
};

}  // namespace testutil
