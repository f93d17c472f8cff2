#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "petseg/volume.hpp"

namespace petseg {

/// Smallest grid on which the full set of structures is generated reliably.
inline constexpr int64_t kMinPhantomDim = 32;

/// Parameters of the procedural brain phantom. Uptake means are indexed by
/// region id (0 = background, which may be zero; ids 1..30 must be positive).
struct PhantomSpec {
  std::array<int64_t, 3> dims = {64, 64, 64};
  int n_regions = kNumRegions;
  std::array<double, kNumRegions + 1> uptake_mean{};
  double cortical_uplift = 0.6;
  double noise_sigma = 0.1;
  double smooth_fwhm_vox = 2.0;
  uint64_t seed = 2024;

  static PhantomSpec defaults();
  void validate() const;
};

struct SubjectRecord {
  std::string id;
  Volume pet;
  LabelMap labels;
  bool amyloid_positive = false;
};

/// Deterministic brain-like label geometry: an ellipsoidal head whose outer
/// shell is split into 18 cortical sectors by seeded angular Voronoi cells
/// (ids 12..29), with interior ellipsoids for the subcortical structures,
/// cerebellum, brain stem, corpus callosum and CSF ventricles. The sector
/// layout is shared across a cohort (driven by spec.seed); each subject gets
/// a mild random affine jitter of the whole geometry (driven by
/// subject_seed).
LabelMap generate_labelmap(const PhantomSpec& spec, uint64_t subject_seed);

/// Piecewise-constant uptake per region (rising by cortical_uplift on the
/// target cortical ids when positive), Gaussian-blurred by smooth_fwhm_vox,
/// plus additive Gaussian noise of noise_sigma, clamped at zero.
Volume simulate_pet(const LabelMap& labels, const PhantomSpec& spec, bool positive,
                    uint64_t subject_seed);

/// round(n * prevalence) positive subjects, deterministic per seed, with
/// stable ids s0001, s0002, ...
std::vector<SubjectRecord> generate_cohort(int n, double prevalence, const PhantomSpec& spec,
                                           uint64_t seed);

/// Separable zero-padded Gaussian blur used by simulate_pet; sigma <= 0 is a
/// no-op. Exposed so its mass-preservation behaviour can be tested directly.
void gaussian_blur(std::vector<float>& data, const std::array<int64_t, 3>& dims, double sigma);

}  // namespace petseg
