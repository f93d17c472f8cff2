#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "petseg/metrics.hpp"
#include "petseg/rng.hpp"

#include "support.hpp"

using namespace petseg;

namespace {

LabelMap map_of(std::array<int64_t, 3> dims, const std::vector<uint8_t>& values) {
  LabelMap m;
  m.dims = dims;
  m.data = values;
  return m;
}

LabelMap random_map(std::array<int64_t, 3> dims, int max_id, Rng& rng) {
  LabelMap m;
  m.dims = dims;
  m.data.resize(static_cast<size_t>(dims[0] * dims[1] * dims[2]));
  for (auto& v : m.data) v = static_cast<uint8_t>(rng.uniform_int(0, max_id));
  return m;
}

Volume volume_of(std::array<int64_t, 3> dims, const std::vector<float>& values) {
  Volume v;
  v.dims = dims;
  v.data = values;
  return v;
}

/// Independent oracle: voxel-enumeration Dice.
double brute_dice(const LabelMap& a, const LabelMap& b, int id) {
  int64_t pa = 0, pb = 0, both = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool in_a = a.data[i] == id, in_b = b.data[i] == id;
    pa += in_a;
    pb += in_b;
    both += in_a && in_b;
  }
  return 2.0 * static_cast<double>(both) / static_cast<double>(pa + pb);
}

/// Independent oracle: Mann-Whitney pair counting with half-credit ties.
double brute_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  double hits = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        hits += 1.0;
      else if (scores[i] == scores[j])
        hits += 0.5;
    }
  }
  return hits / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("dice hand cases") {
  // 3x3x1 toy grid: |P|=4, |T|=6, |P∩T|=3 -> 2*3/10 = 0.6
  auto pred = map_of({1, 3, 3}, {1, 1, 1, 1, 0, 0, 0, 0, 0});
  auto truth = map_of({1, 3, 3}, {1, 1, 1, 0, 1, 1, 1, 0, 0});
  auto d = dice(pred, truth, 1);
  REQUIRE(d.has_value());
  CHECK(*d == doctest::Approx(0.6).epsilon(1e-12));

  CHECK(*dice(truth, truth, 1) == doctest::Approx(1.0));
  CHECK_FALSE(dice(pred, truth, 9).has_value());    // absent from both
  CHECK(*dice(pred, truth, 0) > 0.0);               // background participates when asked

  // present in only one map -> defined, zero overlap
  auto empty = map_of({1, 3, 3}, std::vector<uint8_t>(9, 0));
  auto one = dice(pred, empty, 1);
  REQUIRE(one.has_value());
  CHECK(*one == 0.0);

  auto wrong = map_of({1, 3, 4}, std::vector<uint8_t>(12, 0));
  CHECK_THROWS_AS(dice(pred, wrong, 1), ValueError);
}

TEST_CASE("dice is symmetric and blind to other labels") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    auto a = random_map({2, 3, 4}, 4, rng);
    auto b = random_map({2, 3, 4}, 4, rng);
    for (int id = 0; id <= 4; ++id) {
      auto ab = dice(a, b, id);
      auto ba = dice(b, a, id);
      CHECK(ab.has_value() == ba.has_value());
      if (ab) CHECK(*ab == doctest::Approx(*ba).epsilon(1e-15));
      if (ab) CHECK(*ab == doctest::Approx(brute_dice(a, b, id)).epsilon(1e-12));
    }
    // relabeling voxels of other ids never changes dice for id 1
    auto c = b;
    for (auto& v : c.data)
      if (v >= 3) v = static_cast<uint8_t>(v == 3 ? 4 : 3);
    auto before = dice(a, b, 1), after = dice(a, c, 1);
    CHECK(before.has_value() == after.has_value());
    if (before) CHECK(*before == *after);
  }
}

TEST_CASE("dice_report averages only the defined regions") {
  auto pred = map_of({1, 2, 3}, {1, 1, 2, 0, 0, 0});
  auto truth = map_of({1, 2, 3}, {1, 0, 2, 2, 0, 0});
  auto rep = dice_report(pred, truth);
  REQUIRE(rep.per_region[0].has_value());
  CHECK(*rep.per_region[0] == doctest::Approx(2.0 / 3.0));
  REQUIRE(rep.per_region[1].has_value());
  CHECK(*rep.per_region[1] == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(rep.per_region[2].has_value());
  CHECK(rep.defined == 2);
  CHECK(rep.macro == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("region_mean_suv") {
  auto labels = map_of({1, 1, 4}, {1, 2, 2, 0});
  auto pet = volume_of({1, 1, 4}, {5.0f, 1.0f, 3.0f, 99.0f});
  std::vector<int> one{1}, two{2}, both{1, 2}, none{7};
  CHECK(region_mean_suv(pet, labels, std::span<const int>(one)) == doctest::Approx(5.0));
  CHECK(region_mean_suv(pet, labels, std::span<const int>(two)) == doctest::Approx(2.0));
  CHECK(region_mean_suv(pet, labels, std::span<const int>(both)) == doctest::Approx(3.0));
  CHECK_THROWS_AS(region_mean_suv(pet, labels, std::span<const int>(none)), ValueError);

  Rng rng(31);
  auto rl = random_map({3, 4, 5}, 6, rng);
  Volume rv;
  rv.dims = {3, 4, 5};
  rv.data.resize(60);
  for (auto& v : rv.data) v = static_cast<float>(rng.uniform(0.0, 4.0));
  std::vector<int> ids{2, 5};
  double sum = 0;
  int64_t count = 0;
  for (size_t i = 0; i < rl.data.size(); ++i)
    if (rl.data[i] == 2 || rl.data[i] == 5) {
      sum += rv.data[i];
      ++count;
    }
  REQUIRE(count > 0);
  CHECK(region_mean_suv(rv, rl, std::span<const int>(ids)) == doctest::Approx(sum / count).epsilon(1e-12));
}

TEST_CASE("nrmse_region formula, fallback and scale invariance") {
  // two subjects engineered to (m_pred, m_true) = (1.1, 1.0) and (0.9, 1.0)
  auto truth = map_of({1, 1, 2}, {1, 1});
  auto pred_hi = map_of({1, 1, 2}, {1, 0});
  auto pet_hi = volume_of({1, 1, 2}, {1.1f, 0.9f});   // pred mask mean 1.1, truth mean 1.0
  auto pred_lo = map_of({1, 1, 2}, {0, 1});
  auto pet_lo = volume_of({1, 1, 2}, {1.1f, 0.9f});   // pred mask mean 0.9, truth mean 1.0
  std::vector<RegionSample> cohort{{&pet_hi, &pred_hi, &truth}, {&pet_lo, &pred_lo, &truth}};
  std::vector<int> ids{1};
  // float storage of the engineered voxel values shifts the result by ~2e-8
  CHECK(nrmse_region(cohort, std::span<const int>(ids)) == doctest::Approx(0.1).epsilon(1e-6));

  // identical masks -> zero error
  std::vector<RegionSample> perfect{{&pet_hi, &truth, &truth}, {&pet_lo, &truth, &truth}};
  CHECK(nrmse_region(perfect, std::span<const int>(ids)) == doctest::Approx(0.0));

  // empty predicted mask falls back to 0 with a warning
  auto pred_none = map_of({1, 1, 2}, {0, 0});
  std::vector<RegionSample> with_empty{{&pet_hi, &pred_none, &truth}, {&pet_lo, &pred_lo, &truth}};
  std::vector<std::string> warnings;
  const double v = nrmse_region(with_empty, std::span<const int>(ids), &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("empty") != std::string::npos);
  // residuals: (0 - 1.0) and (0.9 - 1.0) -> sqrt((1 + 0.01)/2) / 1.0
  CHECK(v == doctest::Approx(std::sqrt(1.01 / 2.0)).epsilon(1e-9));

  // scaling every PET volume leaves the ratio unchanged
  auto pet_hi2 = pet_hi, pet_lo2 = pet_lo;
  for (auto& x : pet_hi2.data) x *= 2.0f;
  for (auto& x : pet_lo2.data) x *= 2.0f;
  std::vector<RegionSample> scaled{{&pet_hi2, &pred_hi, &truth}, {&pet_lo2, &pred_lo, &truth}};
  CHECK(nrmse_region(scaled, std::span<const int>(ids)) ==
        doctest::Approx(nrmse_region(cohort, std::span<const int>(ids))).epsilon(1e-12));
}

TEST_CASE("suvr ratio, reference guard and scale invariance") {
  const auto table = RegionTable::builtin();
  // constant volume -> suvr exactly 1
  LabelMap lab;
  lab.dims = {2, 2, 2};
  lab.data = {24, 24, 11, 11, 0, 15, 17, 18};
  auto pet = volume_of({2, 2, 2}, std::vector<float>(8, 2.5f));
  CHECK(suvr(pet, lab, table) == doctest::Approx(1.0));

  // cortical mean 1.32, reference mean 1.20 -> 1.1
  auto pet2 = volume_of({2, 2, 2}, {1.32f, 1.32f, 1.20f, 1.20f, 9.0f, 1.32f, 1.32f, 1.32f});
  CHECK(suvr(pet2, lab, table) == doctest::Approx(1.1).epsilon(1e-6));

  // power-of-two factor so the voxel scaling itself is exact in float
  auto pet3 = pet2;
  for (auto& v : pet3.data) v *= 4.0f;
  CHECK(suvr(pet3, lab, table) == doctest::Approx(suvr(pet2, lab, table)).epsilon(1e-12));

  // empty reference region rejected
  LabelMap noref = lab;
  for (auto& v : noref.data)
    if (v == 11) v = 0;
  CHECK_THROWS_AS(suvr(pet2, noref, table), ValueError);
}

TEST_CASE("roc worked example and curve shape") {
  std::vector<double> scores{0.8, 0.3, 0.5, 0.1};
  std::vector<uint8_t> labels{1, 1, 0, 0};
  auto curve = roc(scores, labels);
  CHECK(curve.auc == doctest::Approx(0.75).epsilon(1e-12));

  REQUIRE(curve.points.size() >= 2);
  CHECK(curve.points.front().fpr == 0.0);
  CHECK(curve.points.front().tpr == 0.0);
  CHECK(curve.points.back().fpr == 1.0);
  CHECK(curve.points.back().tpr == 1.0);
  CHECK(std::isinf(curve.points.front().threshold));
  for (size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].threshold <= curve.points[i - 1].threshold);
    CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
    CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
  }

  // perfect separation
  std::vector<double> sep{0.9, 0.8, 0.2, 0.1};
  CHECK(roc(sep, labels).auc == doctest::Approx(1.0));

  // single-class inputs rejected
  std::vector<uint8_t> all_pos{1, 1, 1, 1};
  CHECK_THROWS_AS(roc(scores, all_pos), ValueError);
  std::vector<uint8_t> all_neg{0, 0, 0, 0};
  CHECK_THROWS_AS(roc(scores, all_neg), ValueError);
}

TEST_CASE("trapezoid AUC equals Mann-Whitney on random instances with ties") {
  Rng rng(41);
  for (int t = 0; t < 300; ++t) {
    const int n = static_cast<int>(rng.uniform_int(2, 24));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<uint8_t> labels(static_cast<size_t>(n));
    // quantized scores force plenty of ties
    for (auto& s : scores) s = static_cast<double>(rng.uniform_int(0, 6)) / 3.0;
    bool has_pos = false, has_neg = false;
    for (auto& l : labels) {
      l = static_cast<uint8_t>(rng.uniform() < 0.5);
      (l ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    auto curve = roc(scores, labels);
    CHECK(curve.auc == doctest::Approx(brute_auc(scores, labels)).epsilon(1e-12));
  }

  // permutation baseline: random labels hover near 0.5
  const int n = 4000;
  std::vector<double> scores(n);
  std::vector<uint8_t> labels(n);
  for (auto& s : scores) s = rng.uniform();
  for (auto& l : labels) l = static_cast<uint8_t>(rng.uniform() < 0.5);
  auto curve = roc(scores, labels);
  CHECK(std::abs(curve.auc - 0.5) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("classification at a fixed threshold") {
  std::vector<double> scores{0.8, 0.3, 0.5, 0.1};
  std::vector<uint8_t> labels{1, 1, 0, 0};

  // at 0.4: TP {0.8}, FN {0.3}, FP {0.5}, TN {0.1}
  auto r = classify(scores, labels, 0.4);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.sensitivity == doctest::Approx(0.5));
  CHECK(r.specificity == doctest::Approx(0.5));

  // at 0.55 the lone false positive flips to a true negative
  auto r2 = classify(scores, labels, 0.55);
  CHECK(r2.accuracy == doctest::Approx(0.75));
  CHECK(r2.sensitivity == doctest::Approx(0.5));
  CHECK(r2.specificity == doctest::Approx(1.0));

  // threshold below all scores: everything called positive
  auto lo = classify(scores, labels, 0.0);
  CHECK(lo.sensitivity == doctest::Approx(1.0));
  CHECK(lo.specificity == doctest::Approx(0.0));

  // threshold above all scores: everything called negative
  auto hi = classify(scores, labels, 2.0);
  CHECK(hi.sensitivity == doctest::Approx(0.0));
  CHECK(hi.specificity == doctest::Approx(1.0));

  // boundary counts as positive (score >= threshold)
  auto edge = classify(scores, labels, 0.8);
  CHECK(edge.sensitivity == doctest::Approx(0.5));

  std::vector<uint8_t> one_class{1, 1, 1, 1};
  CHECK_THROWS_AS(classify(scores, one_class, 0.4), ValueError);
}

TEST_SUITE_END();
