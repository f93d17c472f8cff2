#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "petseg/metrics.hpp"
#include "petseg/phantom.hpp"
#include "petseg/regions.hpp"
#include "petseg/unet.hpp"
#include "petseg/volume.hpp"

namespace petseg {

struct TrainConfig {
  int max_epochs = 200;
  int patience = 10;
  double lr = 1e-3;
  int batch_size = 1;
  uint64_t seed = 42;
  std::array<double, 3> split_fractions = {0.65, 0.10, 0.25};
  bool class_weighting = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string checkpoint_path;  // best weights written here when non-empty

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;     // 1-based epoch with the lowest validation loss
  int stopped_epoch = 0;  // last epoch that ran
  std::string stop_reason;  // "early" or "max_epochs"
};

/// Validation-loss watcher: improvement is a strict decrease; training stops
/// once `patience` consecutive epochs fail to improve. Ties keep the earlier
/// best epoch.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);

  /// Records one epoch's validation loss; returns true when training should
  /// stop after this epoch.
  bool record(double val_loss);

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  int epochs_since_best() const { return bad_epochs_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
  int bad_epochs_ = 0;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Seeded uniform shuffle of 0..n-1 followed by a contiguous partition.
/// Validation and test sizes are round(n * fraction); train takes the
/// remainder. Every part must end up non-empty.
SplitIndices split(int n_subjects, const std::array<double, 3>& fractions, uint64_t seed);

std::vector<const SubjectRecord*> gather(const std::vector<SubjectRecord>& cohort,
                                         const std::vector<int>& indices);

/// Per-class inverse-frequency weights over the training labels,
/// w_c = N / (C * count_c) with C the number of classes present; absent
/// classes get weight 0.
std::vector<float> class_weights(const std::vector<const SubjectRecord*>& train_set,
                                 int num_classes);

/// Trains in place with Adam on whole-volume batches, shuffling the training
/// order each epoch, and restores the parameters of the best-validation-loss
/// epoch before returning. Inputs are z-scored per volume.
TrainHistory train(UNetModel<float>& model, const std::vector<const SubjectRecord*>& train_set,
                   const std::vector<const SubjectRecord*>& val_set, const TrainConfig& config);

/// Per-voxel argmax over class probabilities, ties toward the lowest class
/// index; the input volume is z-scored exactly as during training.
LabelMap predict(const UNetModel<float>& model, const Volume& pet);

struct EvaluationReport {
  std::array<std::optional<double>, kNumRegions> dice_mean;  // per region, averaged over subjects
  double macro_dice = 0.0;
  std::array<double, kTargetComposites.size()> nrmse{};  // kTargetComposites order
  std::vector<std::string> subject_ids;
  std::vector<double> suvr_pred;
  std::vector<double> suvr_true;
  std::vector<uint8_t> amyloid;  // ground-truth flags
  RocCurve roc_pred;
  RocCurve roc_true;
  ClassificationResult classification;  // on predicted SUVR at `threshold`
  double threshold = 0.0;
  std::vector<std::string> warnings;
};

EvaluationReport evaluate(const UNetModel<float>& model,
                          const std::vector<const SubjectRecord*>& test_set,
                          const RegionTable& table, double threshold);

}  // namespace petseg
