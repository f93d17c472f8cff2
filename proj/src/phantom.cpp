#include "petseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "petseg/common.hpp"
#include "petseg/regions.hpp"
#include "petseg/rng.hpp"

namespace petseg {
namespace {

constexpr int kNumSectors = 18;
constexpr int kFirstSectorId = 12;
constexpr double kFwhmToSigma = 2.3548;

// Coordinates are (z, y, x) in (-1, 1), z growing inferior, y posterior.
using Vec3 = std::array<double, 3>;

constexpr Vec3 kHeadSemi = {0.80, 0.86, 0.84};
constexpr double kCortexRho = 0.80;
constexpr double kCerebellarGrayRho = 0.62;

struct Structure {
  int id;
  Vec3 center;
  Vec3 semi;
  bool mirrored;  // also placed at -x
};

// Interior structures in priority order; earlier entries win overlaps so the
// smallest regions keep their volume.
constexpr Structure kInterior[] = {
    {30, {-0.06, 0.00, 0.13}, {0.12, 0.26, 0.07}, true},   // CSF ventricles
    {3, {0.40, 0.02, 0.00}, {0.22, 0.11, 0.11}, false},    // brain stem
    {4, {-0.22, 0.05, 0.00}, {0.07, 0.30, 0.16}, false},   // corpus callosum
    {8, {0.06, -0.10, 0.21}, {0.07, 0.08, 0.06}, true},    // pallidum
    {10, {0.24, -0.04, 0.26}, {0.08, 0.09, 0.08}, true},   // amygdala
    {6, {-0.04, -0.20, 0.13}, {0.09, 0.14, 0.06}, true},   // caudate + accumbens
    {9, {0.22, 0.16, 0.27}, {0.07, 0.16, 0.08}, true},     // hippocampus
    {7, {0.04, -0.06, 0.28}, {0.09, 0.13, 0.07}, true},    // putamen
    {5, {0.06, 0.06, 0.15}, {0.11, 0.13, 0.09}, true},     // thalamus
};

constexpr Vec3 kCerebellumCenter = {0.34, 0.34, 0.00};
constexpr Vec3 kCerebellumSemi = {0.22, 0.24, 0.30};

double ellipsoid_rho(const Vec3& p, const Vec3& center, const Vec3& semi) {
  double q = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = (p[i] - center[i]) / semi[i];
    q += d * d;
  }
  return std::sqrt(q);
}

struct Affine {
  double rot[3][3];
  Vec3 scale;
  Vec3 translate;

  // Maps a voxel-grid point back into atlas coordinates.
  Vec3 to_atlas(const Vec3& u) const {
    Vec3 shifted;
    for (int i = 0; i < 3; ++i) shifted[i] = u[i] - translate[i];
    Vec3 p;
    for (int i = 0; i < 3; ++i) {
      double v = 0.0;
      for (int j = 0; j < 3; ++j) v += rot[j][i] * shifted[j];  // transpose = inverse
      p[i] = v / scale[i];
    }
    return p;
  }
};

Affine subject_jitter(uint64_t subject_seed) {
  Rng rng = Rng(subject_seed).fork(1);
  const double max_angle = 4.0 * std::numbers::pi / 180.0;
  double angles[3];
  for (auto& a : angles) a = rng.uniform(-max_angle, max_angle);
  Affine affine;
  for (auto& s : affine.scale) s = rng.uniform(0.96, 1.04);
  for (auto& t : affine.translate) t = rng.uniform(-0.03, 0.03);

  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int axis = 0; axis < 3; ++axis) {
    const double c = std::cos(angles[axis]);
    const double s = std::sin(angles[axis]);
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    double r[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    r[a][a] = c;
    r[a][b] = -s;
    r[b][a] = s;
    r[b][b] = c;
    double out[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += r[i][k] * m[k][j];
        out[i][j] = v;
      }
    std::copy(&out[0][0], &out[0][0] + 9, &m[0][0]);
  }
  std::copy(&m[0][0], &m[0][0] + 9, &affine.rot[0][0]);
  return affine;
}

// 18 well-separated unit directions (Fibonacci sphere) with a bounded seeded
// jitter, shared by every subject of a cohort.
std::array<Vec3, kNumSectors> sector_directions(uint64_t atlas_seed) {
  Rng rng = Rng(atlas_seed).fork(2);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::array<Vec3, kNumSectors> dirs;
  for (int i = 0; i < kNumSectors; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / kNumSectors;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    Vec3 d = {z, r * std::cos(phi), r * std::sin(phi)};
    for (auto& c : d) c += rng.uniform(-0.12, 0.12);
    double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    for (auto& c : d) c /= norm;
    dirs[i] = d;
  }
  return dirs;
}

int classify(const Vec3& p, const std::array<Vec3, kNumSectors>& sectors) {
  const double rho = ellipsoid_rho(p, {0, 0, 0}, kHeadSemi);
  if (rho > 1.0) return 0;

  if (rho >= kCortexRho) {
    Vec3 q = {p[0] / kHeadSemi[0], p[1] / kHeadSemi[1], p[2] / kHeadSemi[2]};
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
    int best = 0;
    double best_dot = -2.0;
    for (int k = 0; k < kNumSectors; ++k) {
      const double dot =
          (q[0] * sectors[k][0] + q[1] * sectors[k][1] + q[2] * sectors[k][2]) / norm;
      if (dot > best_dot) {
        best_dot = dot;
        best = k;
      }
    }
    return kFirstSectorId + best;
  }

  for (const auto& s : kInterior) {
    if (ellipsoid_rho(p, s.center, s.semi) <= 1.0) return s.id;
    if (s.mirrored) {
      const Vec3 mirrored = {s.center[0], s.center[1], -s.center[2]};
      if (ellipsoid_rho(p, mirrored, s.semi) <= 1.0) return s.id;
    }
  }

  const double cb = ellipsoid_rho(p, kCerebellumCenter, kCerebellumSemi);
  if (cb <= 1.0) return cb >= kCerebellarGrayRho ? 11 : 2;

  return 1;  // cerebral white matter
}

}  // namespace

PhantomSpec PhantomSpec::defaults() {
  PhantomSpec spec;
  spec.uptake_mean = {
      0.0,   // background
      1.6,   // cerebral white matter
      1.6,   // cerebellar white matter
      1.5,   // brain stem
      1.6,   // corpus callosum
      1.25,  // thalamus
      1.15,  // caudate + accumbens
      1.25,  // putamen
      1.35,  // pallidum
      1.1,   // hippocampus
      1.1,   // amygdala
      1.0,   // cerebellar gray matter (reference)
      1.05,  // cuneus + lingual + pericalcarine
      1.05,  // entorhinal
      1.05,  // fusiform + parahippocampal
      1.0,   // inferior temporal (target)
      1.05,  // lateral occipital
      1.0,   // lateral orbitofrontal (target)
      1.0,   // medial orbitofrontal (target)
      1.0,   // middle temporal (target)
      1.05,  // paracentral + precentral
      1.0,   // caudal middle frontal (target)
      1.05,  // rostral + caudal anterior cingulate
      1.05,  // posterior + isthmus cingulate
      1.0,   // precuneus (target)
      1.0,   // rostral middle frontal (target)
      1.0,   // superior frontal (target)
      1.0,   // superior temporal (target)
      1.05,  // inferior parietal + postcentral
      1.05,  // insula + transverse temporal
      0.3,   // cerebrospinal fluid
  };
  return spec;
}

void PhantomSpec::validate() const {
  if (n_regions != kNumRegions)
    throw ValueError(fmt::format("phantom supports exactly {} regions, got {}", kNumRegions,
                                 n_regions));
  for (int axis = 0; axis < 3; ++axis) {
    if (dims[axis] % 8 != 0)
      throw ValueError(fmt::format("phantom dims must be divisible by 8, got [{},{},{}]", dims[0],
                                   dims[1], dims[2]));
    if (dims[axis] < kMinPhantomDim)
      throw ValueError(fmt::format(
          "phantom dims [{},{},{}] too small to fit all regions, minimum is {} per axis", dims[0],
          dims[1], dims[2], kMinPhantomDim));
  }
  if (!(uptake_mean[0] >= 0.0))
    throw ValueError("background uptake mean must be >= 0");
  for (int id = 1; id <= kNumRegions; ++id)
    if (!(uptake_mean[static_cast<size_t>(id)] > 0.0))
      throw ValueError(fmt::format("uptake mean for region {} must be positive, got {}", id,
                                   uptake_mean[static_cast<size_t>(id)]));
  if (!(cortical_uplift >= 0.0))
    throw ValueError(fmt::format("cortical uplift must be >= 0, got {}", cortical_uplift));
  if (!(noise_sigma >= 0.0))
    throw ValueError(fmt::format("noise sigma must be >= 0, got {}", noise_sigma));
  if (!(smooth_fwhm_vox >= 0.0))
    throw ValueError(fmt::format("smoothing FWHM must be >= 0, got {}", smooth_fwhm_vox));
}

LabelMap generate_labelmap(const PhantomSpec& spec, uint64_t subject_seed) {
  spec.validate();
  const auto sectors = sector_directions(spec.seed);
  const Affine affine = subject_jitter(subject_seed);

  LabelMap labels;
  labels.dims = spec.dims;
  labels.spacing_mm = {2.0, 2.0, 2.0};
  labels.data.resize(static_cast<size_t>(labels.numel()));

  const auto [D, H, W] = spec.dims;
  size_t idx = 0;
  for (int64_t z = 0; z < D; ++z) {
    const double uz = (2.0 * (z + 0.5)) / D - 1.0;
    for (int64_t y = 0; y < H; ++y) {
      const double uy = (2.0 * (y + 0.5)) / H - 1.0;
      for (int64_t x = 0; x < W; ++x, ++idx) {
        const double ux = (2.0 * (x + 0.5)) / W - 1.0;
        const Vec3 p = affine.to_atlas({uz, uy, ux});
        labels.data[idx] = static_cast<uint8_t>(classify(p, sectors));
      }
    }
  }
  return labels;
}

void gaussian_blur(std::vector<float>& data, const std::array<int64_t, 3>& dims, double sigma) {
  if (!(sigma > 0.0)) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * (k / sigma) * (k / sigma));
    kernel[static_cast<size_t>(k + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  const auto [D, H, W] = dims;
  std::vector<float> tmp(data.size());
  const auto at = [&](int64_t z, int64_t y, int64_t x) -> size_t {
    return static_cast<size_t>((z * H + y) * W + x);
  };

  for (int axis = 0; axis < 3; ++axis) {
    const int64_t extent = dims[static_cast<size_t>(axis)];
    for (int64_t z = 0; z < D; ++z)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            int64_t c[3] = {z, y, x};
            c[axis] += k;
            if (c[axis] < 0 || c[axis] >= extent) continue;
            acc += kernel[static_cast<size_t>(k + radius)] * data[at(c[0], c[1], c[2])];
          }
          tmp[at(z, y, x)] = static_cast<float>(acc);
        }
    data.swap(tmp);
  }
}

Volume simulate_pet(const LabelMap& labels, const PhantomSpec& spec, bool positive,
                    uint64_t subject_seed) {
  spec.validate();
  labels.validate();

  static const std::vector<int> target_ids = RegionTable::builtin().target_cortical();
  std::array<double, kNumRegions + 1> mean = spec.uptake_mean;
  if (positive)
    for (int id : target_ids) mean[static_cast<size_t>(id)] += spec.cortical_uplift;

  Volume pet;
  pet.dims = labels.dims;
  pet.spacing_mm = labels.spacing_mm;
  pet.orientation = labels.orientation;
  pet.data.resize(labels.data.size());
  for (size_t i = 0; i < labels.data.size(); ++i)
    pet.data[i] = static_cast<float>(mean[labels.data[i]]);

  gaussian_blur(pet.data, pet.dims, spec.smooth_fwhm_vox / kFwhmToSigma);

  if (spec.noise_sigma > 0.0) {
    Rng rng = Rng(subject_seed).fork(3);
    for (auto& v : pet.data) v += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
  }
  for (auto& v : pet.data) v = std::max(v, 0.0f);
  return pet;
}

std::vector<SubjectRecord> generate_cohort(int n, double prevalence, const PhantomSpec& spec,
                                           uint64_t seed) {
  if (n <= 0) throw ValueError(fmt::format("cohort size must be positive, got {}", n));
  if (prevalence < 0.0 || prevalence > 1.0)
    throw ValueError(fmt::format("prevalence must lie in [0,1], got {}", prevalence));
  spec.validate();

  const int n_positive = static_cast<int>(std::lround(n * prevalence));
  std::vector<uint8_t> status(static_cast<size_t>(n), 0);
  std::fill(status.begin(), status.begin() + n_positive, uint8_t{1});
  Rng shuffle_rng = Rng(seed).fork(4);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle_rng.uniform_int(0, i));
    std::swap(status[static_cast<size_t>(i)], status[static_cast<size_t>(j)]);
  }

  std::vector<SubjectRecord> cohort;
  cohort.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    SubjectRecord rec;
    rec.id = fmt::format("s{:04d}", i + 1);
    rec.amyloid_positive = status[static_cast<size_t>(i)] != 0;
    const uint64_t subject_seed = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(i) + 1));
    rec.labels = generate_labelmap(spec, subject_seed);
    rec.pet = simulate_pet(rec.labels, spec, rec.amyloid_positive, subject_seed);
    validate_pair(rec.pet, rec.labels);
    cohort.push_back(std::move(rec));
  }
  return cohort;
}

}  // namespace petseg
