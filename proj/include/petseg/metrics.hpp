#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "petseg/regions.hpp"
#include "petseg/volume.hpp"

namespace petseg {

/// 2|P∩T| / (|P|+|T|) over voxels carrying region_id; nullopt when the
/// region is absent from both maps (undefined, never reported as 0).
std::optional<double> dice(const LabelMap& pred, const LabelMap& truth, int region_id);

struct DiceReport {
  std::array<std::optional<double>, kNumRegions> per_region;  // index = id - 1
  double macro = 0.0;  // mean over defined regions
  int defined = 0;
};

DiceReport dice_report(const LabelMap& pred, const LabelMap& truth);

/// Arithmetic mean of pet over voxels whose label lies in region_ids;
/// rejects an empty union so callers decide the fallback.
double region_mean_suv(const Volume& pet, const LabelMap& labels, std::span<const int> region_ids);

/// One subject's inputs for cohort-level regional error.
struct RegionSample {
  const Volume* pet = nullptr;
  const LabelMap* pred = nullptr;
  const LabelMap* truth = nullptr;
};

/// Cohort NRMSE of a region composite: RMSE over subjects of
/// (mean-over-pred-mask - mean-over-truth-mask), normalized by the mean true
/// value. A subject whose predicted mask is empty contributes 0 and a
/// warning.
double nrmse_region(std::span<const RegionSample> cohort, std::span<const int> region_ids,
                    std::vector<std::string>* warnings = nullptr);

/// Mean uptake over the target cortical composite divided by mean uptake
/// over the cerebellar gray reference region.
double suvr(const Volume& pet, const LabelMap& labels, const RegionTable& table);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold decreasing, (0,0) .. (1,1)
  double auc = 0.0;
};

/// ROC over amyloid scores: thresholds at every distinct score plus +/-inf
/// sentinels, a case counting positive when score >= threshold, AUC by
/// trapezoid (equal to the Mann-Whitney statistic). Both classes must be
/// present.
RocCurve roc(std::span<const double> scores, std::span<const uint8_t> labels);

struct ClassificationResult {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Confusion counts at a fixed threshold (positive when score >= threshold).
/// Both classes must be present.
ClassificationResult classify(std::span<const double> scores, std::span<const uint8_t> labels,
                              double threshold);

}  // namespace petseg
