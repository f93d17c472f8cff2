#include "petseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "petseg/common.hpp"

namespace petseg {
namespace {

std::array<bool, kNumRegions + 1> region_mask(std::span<const int> region_ids) {
  std::array<bool, kNumRegions + 1> mask{};
  for (int id : region_ids) {
    if (id < 0 || id > kNumRegions)
      throw ValueError(fmt::format("region id {} outside 0..{}", id, kNumRegions));
    mask[static_cast<size_t>(id)] = true;
  }
  return mask;
}

void require_both_classes(std::span<const uint8_t> labels) {
  bool has_pos = false;
  bool has_neg = false;
  for (uint8_t l : labels) (l ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw ValueError("scores cover only one class; both positives and negatives are required");
}

}  // namespace

std::optional<double> dice(const LabelMap& pred, const LabelMap& truth, int region_id) {
  if (pred.dims != truth.dims)
    throw ValueError(fmt::format("label map dims [{},{},{}] vs [{},{},{}] do not match",
                                 pred.dims[0], pred.dims[1], pred.dims[2], truth.dims[0],
                                 truth.dims[1], truth.dims[2]));
  if (region_id < 0 || region_id > kNumRegions)
    throw ValueError(fmt::format("region id {} outside 0..{}", region_id, kNumRegions));

  int64_t in_pred = 0, in_truth = 0, in_both = 0;
  const uint8_t id = static_cast<uint8_t>(region_id);
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] == id;
    const bool t = truth.data[i] == id;
    in_pred += p;
    in_truth += t;
    in_both += p && t;
  }
  if (in_pred + in_truth == 0) return std::nullopt;
  return 2.0 * static_cast<double>(in_both) / static_cast<double>(in_pred + in_truth);
}

DiceReport dice_report(const LabelMap& pred, const LabelMap& truth) {
  DiceReport report;
  double sum = 0.0;
  for (int id = 1; id <= kNumRegions; ++id) {
    auto d = dice(pred, truth, id);
    report.per_region[static_cast<size_t>(id - 1)] = d;
    if (d) {
      sum += *d;
      ++report.defined;
    }
  }
  report.macro = report.defined > 0 ? sum / report.defined : 0.0;
  return report;
}

double region_mean_suv(const Volume& pet, const LabelMap& labels,
                       std::span<const int> region_ids) {
  if (pet.dims != labels.dims)
    throw ValueError(fmt::format("PET dims [{},{},{}] vs label dims [{},{},{}] do not match",
                                 pet.dims[0], pet.dims[1], pet.dims[2], labels.dims[0],
                                 labels.dims[1], labels.dims[2]));
  const auto mask = region_mask(region_ids);
  double sum = 0.0;
  int64_t count = 0;
  for (size_t i = 0; i < labels.data.size(); ++i)
    if (mask[labels.data[i]]) {
      sum += pet.data[i];
      ++count;
    }
  if (count == 0) throw ValueError("region union is empty, mean uptake undefined");
  return sum / static_cast<double>(count);
}

double nrmse_region(std::span<const RegionSample> cohort, std::span<const int> region_ids,
                    std::vector<std::string>* warnings) {
  if (cohort.size() < 2)
    throw ValueError(fmt::format("regional NRMSE needs at least 2 subjects, got {}", cohort.size()));
  const auto mask = region_mask(region_ids);

  double sq_sum = 0.0;
  double true_sum = 0.0;
  for (size_t s = 0; s < cohort.size(); ++s) {
    const auto& sample = cohort[s];
    const double m_true = region_mean_suv(*sample.pet, *sample.truth, region_ids);

    double pred_sum = 0.0;
    int64_t pred_count = 0;
    for (size_t i = 0; i < sample.pred->data.size(); ++i)
      if (mask[sample.pred->data[i]]) {
        pred_sum += sample.pet->data[i];
        ++pred_count;
      }
    double m_pred = 0.0;
    if (pred_count > 0) {
      m_pred = pred_sum / static_cast<double>(pred_count);
    } else if (warnings) {
      warnings->push_back(
          fmt::format("subject {}: predicted region mask is empty, mean uptake taken as 0", s));
    }

    const double diff = m_pred - m_true;
    sq_sum += diff * diff;
    true_sum += m_true;
  }

  const double n = static_cast<double>(cohort.size());
  const double mean_true = true_sum / n;
  if (!(mean_true > 0.0))
    throw ValueError(fmt::format("mean true uptake {} is not positive, NRMSE undefined", mean_true));
  return std::sqrt(sq_sum / n) / mean_true;
}

double suvr(const Volume& pet, const LabelMap& labels, const RegionTable& table) {
  table.validate();
  const std::vector<int> target = table.target_cortical();
  const std::array<int, 1> reference = {table.reference_id};

  bool ref_present = false;
  const uint8_t ref_id = static_cast<uint8_t>(table.reference_id);
  for (uint8_t l : labels.data)
    if (l == ref_id) {
      ref_present = true;
      break;
    }
  if (!ref_present)
    throw ValueError(fmt::format("reference region {} is empty, SUVR undefined",
                                 table.reference_id));

  return region_mean_suv(pet, labels, target) / region_mean_suv(pet, labels, reference);
}

RocCurve roc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size())
    throw ValueError(fmt::format("{} scores vs {} labels", scores.size(), labels.size()));
  if (scores.empty()) throw ValueError("ROC needs at least one score");
  require_both_classes(labels);

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  int64_t n_pos = 0;
  for (uint8_t l : labels) n_pos += l != 0;
  const int64_t n_neg = static_cast<int64_t>(labels.size()) - n_pos;

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    // everything with the same score flips in one step
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]])
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});

  double auc = 0.0;
  for (size_t p = 1; p < curve.points.size(); ++p) {
    const auto& a = curve.points[p - 1];
    const auto& b = curve.points[p];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  curve.auc = auc;
  return curve;
}

ClassificationResult classify(std::span<const double> scores, std::span<const uint8_t> labels,
                              double threshold) {
  if (scores.size() != labels.size())
    throw ValueError(fmt::format("{} scores vs {} labels", scores.size(), labels.size()));
  if (scores.empty()) throw ValueError("classification needs at least one score");
  require_both_classes(labels);

  int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual)
      ++tp;
    else if (predicted)
      ++fp;
    else if (actual)
      ++fn;
    else
      ++tn;
  }
  ClassificationResult result;
  result.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  result.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  result.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return result;
}

}  // namespace petseg
