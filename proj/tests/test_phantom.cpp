#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "petseg/metrics.hpp"
#include "petseg/phantom.hpp"
#include "petseg/regions.hpp"

#include "support.hpp"

using namespace petseg;

namespace {

std::array<int64_t, 31> count_labels(const LabelMap& labels) {
  std::array<int64_t, 31> counts{};
  for (uint8_t v : labels.data) counts[v]++;
  return counts;
}

}  // namespace

TEST_SUITE_BEGIN("phantom");

TEST_CASE("spec validation") {
  auto spec = PhantomSpec::defaults();
  CHECK_NOTHROW(spec.validate());

  auto bad = spec;
  bad.dims = {20, 64, 64};  // not divisible by 8 and below the minimum
  CHECK_THROWS_AS(bad.validate(), ValueError);
  bad = spec;
  bad.dims = {24, 24, 24};  // divisible by 8 but too small
  CHECK_THROWS_AS(bad.validate(), ValueError);
  bad = spec;
  bad.uptake_mean[5] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValueError);
  bad = spec;
  bad.noise_sigma = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValueError);
  bad = spec;
  bad.n_regions = 12;
  CHECK_THROWS_AS(bad.validate(), ValueError);
}

TEST_CASE("label maps are deterministic and cover every region") {
  auto spec = PhantomSpec::defaults();
  for (uint64_t subject : {1ull, 2ull}) {
    auto a = generate_labelmap(spec, subject);
    auto b = generate_labelmap(spec, subject);
    CHECK(a.data == b.data);

    const auto counts = count_labels(a);
    for (int id = 1; id <= 30; ++id) {
      INFO("region id ", id);
      CHECK(counts[id] >= 32);
    }
    CHECK(counts[0] > 0);  // background survives
  }
}

TEST_CASE("different subject seeds move more than 1% of voxels") {
  auto spec = PhantomSpec::defaults();
  auto a = generate_labelmap(spec, 1);
  auto b = generate_labelmap(spec, 2);
  int64_t diff = 0;
  for (size_t i = 0; i < a.data.size(); ++i) diff += a.data[i] != b.data[i];
  CHECK(static_cast<double>(diff) / static_cast<double>(a.data.size()) > 0.01);
}

TEST_CASE("different cohort seeds relocate the cortical sectors") {
  auto spec_a = PhantomSpec::defaults();
  auto spec_b = spec_a;
  spec_b.seed = spec_a.seed + 1;
  auto a = generate_labelmap(spec_a, 1);
  auto b = generate_labelmap(spec_b, 1);
  CHECK(a.data != b.data);
}

TEST_CASE("degenerate simulation reproduces region means exactly") {
  auto spec = PhantomSpec::defaults();
  spec.noise_sigma = 0.0;
  spec.smooth_fwhm_vox = 0.0;
  auto labels = generate_labelmap(spec, 3);

  auto neg = simulate_pet(labels, spec, false, 3);
  for (size_t i = 0; i < labels.data.size(); ++i) {
    CHECK(neg.data[i] == static_cast<float>(spec.uptake_mean[labels.data[i]]));
  }

  auto pos = simulate_pet(labels, spec, true, 3);
  const auto target = RegionTable::builtin().target_cortical();
  for (size_t i = 0; i < labels.data.size(); ++i) {
    const bool lifted = std::binary_search(target.begin(), target.end(), labels.data[i]);
    const double want = spec.uptake_mean[labels.data[i]] + (lifted ? spec.cortical_uplift : 0.0);
    CHECK(pos.data[i] == static_cast<float>(want));
  }
}

TEST_CASE("positive twin raises target uptake by roughly the uplift") {
  auto spec = PhantomSpec::defaults();
  spec.noise_sigma = 0.0;  // isolate the uplift + blur pathway
  auto labels = generate_labelmap(spec, 4);
  auto neg = simulate_pet(labels, spec, false, 4);
  auto pos = simulate_pet(labels, spec, true, 4);

  const auto target = RegionTable::builtin().target_cortical();
  std::vector<int> ids(target.begin(), target.end());
  const double m_neg = region_mean_suv(neg, labels, std::span<const int>(ids));
  const double m_pos = region_mean_suv(pos, labels, std::span<const int>(ids));
  const double lift = m_pos - m_neg;
  // The default blur (FWHM 2 vox) moves a noticeable share of the uplift out
  // of the thin cortical shell; measured retention at 64^3 is ~0.84. The blur
  // only ever removes uplift mass from the target mask, so the lift must land
  // below the nominal uplift but keep most of it.
  CHECK(lift > 0.7 * spec.cortical_uplift);
  CHECK(lift <= spec.cortical_uplift);

  // non-target voxels keep their mean up to blur leakage
  std::vector<int> wm{1};
  const double wm_neg = region_mean_suv(neg, labels, std::span<const int>(wm));
  const double wm_pos = region_mean_suv(pos, labels, std::span<const int>(wm));
  CHECK(std::abs(wm_pos - wm_neg) < 0.1 * spec.cortical_uplift);
}

TEST_CASE("gaussian blur preserves total mass away from the boundary") {
  std::array<int64_t, 3> dims{32, 32, 32};
  std::vector<float> data(32 * 32 * 32, 0.0f);
  Rng rng(5);
  // mass concentrated in the interior so zero padding loses nothing material
  for (int64_t z = 8; z < 24; ++z)
    for (int64_t y = 8; y < 24; ++y)
      for (int64_t x = 8; x < 24; ++x)
        data[(z * 32 + y) * 32 + x] = static_cast<float>(rng.uniform(0.5, 2.0));
  double before = 0;
  for (float v : data) before += v;
  gaussian_blur(data, dims, 2.0 / 2.3548);
  double after = 0;
  for (float v : data) after += v;
  CHECK(std::abs(after - before) / before < 1e-3);

  // sigma <= 0 is a no-op
  auto copy = data;
  gaussian_blur(copy, dims, 0.0);
  CHECK(copy == data);
}

TEST_CASE("cohorts are deterministic with the requested prevalence") {
  auto spec = PhantomSpec::defaults();
  spec.dims = {32, 32, 32};

  auto cohort = generate_cohort(10, 0.33, spec, 7);
  REQUIRE(cohort.size() == 10);
  int positives = 0;
  for (const auto& s : cohort) positives += s.amyloid_positive;
  CHECK(positives == 3);  // round(3.3)

  auto again = generate_cohort(10, 0.33, spec, 7);
  for (size_t i = 0; i < cohort.size(); ++i) {
    CHECK(cohort[i].id == again[i].id);
    CHECK(cohort[i].amyloid_positive == again[i].amyloid_positive);
    CHECK(cohort[i].pet.data == again[i].pet.data);
    CHECK(cohort[i].labels.data == again[i].labels.data);
  }

  CHECK(cohort[0].id == "s0001");
  CHECK(cohort[9].id == "s0010");
  for (const auto& s : cohort) CHECK_NOTHROW(validate_pair(s.pet, s.labels));

  CHECK_THROWS_AS(generate_cohort(0, 0.5, spec, 7), ValueError);
  CHECK_THROWS_AS(generate_cohort(10, 1.5, spec, 7), ValueError);

  auto half = generate_cohort(8, 0.5, spec, 8);
  int pos_half = 0;
  for (const auto& s : half) pos_half += s.amyloid_positive;
  CHECK(pos_half == 4);
}

TEST_CASE("true-label SUVR separates the two serology groups") {
  auto spec = PhantomSpec::defaults();
  const auto table = RegionTable::builtin();
  auto cohort = generate_cohort(8, 0.5, spec, 11);
  double min_pos = 1e300, max_neg = -1e300;
  for (const auto& s : cohort) {
    const double v = suvr(s.pet, s.labels, table);
    if (s.amyloid_positive)
      min_pos = std::min(min_pos, v);
    else
      max_neg = std::max(max_neg, v);
  }
  CHECK(min_pos > max_neg);  // fully separable at cohort scale
  CHECK(max_neg < 1.11);
  CHECK(min_pos > 1.11);  // the default threshold splits the groups
}

TEST_SUITE_END();
