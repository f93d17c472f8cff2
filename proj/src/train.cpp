#include "petseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "petseg/adam.hpp"
#include "petseg/common.hpp"
#include "petseg/graph.hpp"
#include "petseg/ops.hpp"
#include "petseg/rng.hpp"

namespace petseg {
namespace {

constexpr double kSigmaFloor = 1e-8;

TensorPtr<float> zscored_input(const Volume& pet) {
  const int64_t n = pet.numel();
  double sum = 0.0;
  for (float v : pet.data) sum += v;
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (float v : pet.data) {
    const double d = v - mean;
    sq += d * d;
  }
  const double sigma = std::max(std::sqrt(sq / static_cast<double>(n)), kSigmaFloor);

  auto input = make_tensor<float>({1, pet.dims[0], pet.dims[1], pet.dims[2]});
  for (int64_t i = 0; i < n; ++i)
    input->data[static_cast<size_t>(i)] =
        static_cast<float>((pet.data[static_cast<size_t>(i)] - mean) / sigma);
  return input;
}

double weight_sum(const LabelMap& labels, const std::vector<float>& weights) {
  double den = 0.0;
  for (uint8_t l : labels.data) den += weights[l];
  return den;
}

}  // namespace

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ValueError(fmt::format("max_epochs must be >= 1, got {}", max_epochs));
  if (patience < 1) throw ValueError(fmt::format("patience must be >= 1, got {}", patience));
  if (!(lr > 0.0)) throw ValueError(fmt::format("learning rate must be positive, got {}", lr));
  if (batch_size != 1)
    throw ValueError(fmt::format("only whole-volume batches of size 1 are supported, got {}",
                                 batch_size));
  double sum = 0.0;
  for (double f : split_fractions) {
    if (f < 0.0) throw ValueError(fmt::format("split fraction {} is negative", f));
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValueError(fmt::format("split fractions sum to {}, expected 1", sum));
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ValueError("Adam betas must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw ValueError("Adam epsilon must be positive");
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw ValueError(fmt::format("patience must be >= 1, got {}", patience));
}

bool EarlyStopper::record(double val_loss) {
  ++epoch_;
  if (epoch_ == 1 || val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return false;
  }
  ++bad_epochs_;
  return bad_epochs_ >= patience_;
}

SplitIndices split(int n_subjects, const std::array<double, 3>& fractions, uint64_t seed) {
  if (n_subjects < 1) throw ValueError(fmt::format("cannot split {} subjects", n_subjects));
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ValueError(fmt::format("split fraction {} is negative", f));
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValueError(fmt::format("split fractions sum to {}, expected 1", sum));

  const int n_val = static_cast<int>(std::lround(n_subjects * fractions[1]));
  const int n_test = static_cast<int>(std::lround(n_subjects * fractions[2]));
  const int n_train = n_subjects - n_val - n_test;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw ValueError(fmt::format(
        "fractions [{},{},{}] on {} subjects give sizes {}/{}/{}, every split needs at least 1",
        fractions[0], fractions[1], fractions[2], n_subjects, n_train, n_val, n_test));

  std::vector<int> order(static_cast<size_t>(n_subjects));
  for (int i = 0; i < n_subjects; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng(seed).fork(5);
  for (int i = n_subjects - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(0, i));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }

  SplitIndices parts;
  parts.train.assign(order.begin(), order.begin() + n_train);
  parts.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  parts.test.assign(order.begin() + n_train + n_val, order.end());
  return parts;
}

std::vector<const SubjectRecord*> gather(const std::vector<SubjectRecord>& cohort,
                                         const std::vector<int>& indices) {
  std::vector<const SubjectRecord*> out;
  out.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || static_cast<size_t>(i) >= cohort.size())
      throw ValueError(fmt::format("subject index {} outside cohort of {}", i, cohort.size()));
    out.push_back(&cohort[static_cast<size_t>(i)]);
  }
  return out;
}

std::vector<float> class_weights(const std::vector<const SubjectRecord*>& train_set,
                                 int num_classes) {
  if (num_classes < 1) throw ValueError("num_classes must be >= 1");
  std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
  int64_t total = 0;
  for (const SubjectRecord* rec : train_set) {
    for (uint8_t l : rec->labels.data) {
      if (l >= num_classes)
        throw ValueError(fmt::format("label {} outside the model's {} classes", l, num_classes));
      ++counts[l];
    }
    total += rec->labels.numel();
  }
  int present = 0;
  for (int64_t c : counts) present += c > 0;
  std::vector<float> weights(static_cast<size_t>(num_classes), 0.0f);
  for (size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0)
      weights[c] = static_cast<float>(static_cast<double>(total) /
                                      (static_cast<double>(present) * static_cast<double>(counts[c])));
  return weights;
}

TrainHistory train(UNetModel<float>& model, const std::vector<const SubjectRecord*>& train_set,
                   const std::vector<const SubjectRecord*>& val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ValueError("training set is empty");
  if (val_set.empty()) throw ValueError("validation set is empty");

  const int num_classes = model.config.num_classes;
  std::vector<float> weights;
  if (config.class_weighting) {
    weights = class_weights(train_set, num_classes);
  } else {
    weights.assign(static_cast<size_t>(num_classes), 1.0f);
  }

  std::vector<double> train_den(train_set.size());
  for (size_t i = 0; i < train_set.size(); ++i)
    train_den[i] = weight_sum(train_set[i]->labels, weights);
  std::vector<double> val_den(val_set.size());
  for (size_t i = 0; i < val_set.size(); ++i)
    val_den[i] = weight_sum(val_set[i]->labels, weights);

  model.set_requires_grad(true);
  AdamState<float> adam;
  EarlyStopper stopper(config.patience);
  TrainHistory history;
  std::vector<std::vector<float>> best_params;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng = Rng(config.seed).fork(6).fork(static_cast<uint64_t>(epoch));
    for (size_t i = order.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    double train_num = 0.0;
    double train_den_sum = 0.0;
    for (size_t b = 0; b < order.size(); ++b) {
      const SubjectRecord& rec = *train_set[order[b]];
      Graph<float> graph;
      auto input = zscored_input(rec.pet);
      auto probs = unet_forward(graph, model, input);
      auto loss = cross_entropy_loss(graph, probs,
                                     std::span<const uint8_t>(rec.labels.data),
                                     std::span<const float>(weights));
      const double batch_loss = loss->data[0];
      if (!std::isfinite(batch_loss))
        throw NumericError(fmt::format("non-finite training loss at epoch {}, batch {} (subject {})",
                                       epoch, b + 1, rec.id));
      model.zero_grads();
      graph.backward(loss);
      adam_step(model.params, adam, static_cast<float>(config.lr),
                static_cast<float>(config.adam_beta1), static_cast<float>(config.adam_beta2),
                static_cast<float>(config.adam_eps));
      train_num += batch_loss * train_den[order[b]];
      train_den_sum += train_den[order[b]];
    }

    double val_num = 0.0;
    double val_den_sum = 0.0;
    for (size_t i = 0; i < val_set.size(); ++i) {
      const SubjectRecord& rec = *val_set[i];
      Graph<float> graph(false);
      auto input = zscored_input(rec.pet);
      auto probs = unet_forward(graph, model, input);
      auto loss = cross_entropy_loss(graph, probs,
                                     std::span<const uint8_t>(rec.labels.data),
                                     std::span<const float>(weights));
      val_num += loss->data[0] * val_den[i];
      val_den_sum += val_den[i];
    }
    const double val_loss = val_num / val_den_sum;
    if (!std::isfinite(val_loss))
      throw NumericError(fmt::format("non-finite validation loss at epoch {}", epoch));

    history.epochs.push_back({train_num / train_den_sum, val_loss});

    const bool stop = stopper.record(val_loss);
    if (stopper.best_epoch() == epoch) {
      best_params.clear();
      best_params.reserve(model.params.size());
      for (const auto& p : model.params) best_params.push_back(p->data);
    }

    if (stop) {
      history.stop_reason = "early";
      history.stopped_epoch = epoch;
      break;
    }
    if (epoch == config.max_epochs) {
      history.stop_reason = "max_epochs";
      history.stopped_epoch = epoch;
    }
  }

  history.best_epoch = stopper.best_epoch();
  for (size_t i = 0; i < model.params.size(); ++i) model.params[i]->data = best_params[i];

  if (!config.checkpoint_path.empty()) save_weights(model, config.checkpoint_path);
  return history;
}

LabelMap predict(const UNetModel<float>& model, const Volume& pet) {
  if (model.config.num_classes > kNumRegions + 1)
    throw ValueError(fmt::format("model emits {} classes but labels only allow 0..{}",
                                 model.config.num_classes, kNumRegions));
  Graph<float> graph(false);
  auto input = zscored_input(pet);
  auto probs = unet_forward(graph, model, input);

  const int64_t C = model.config.num_classes;
  const int64_t n = pet.numel();
  LabelMap out;
  out.dims = pet.dims;
  out.spacing_mm = pet.spacing_mm;
  out.orientation = pet.orientation;
  out.data.resize(static_cast<size_t>(n));
  const float* p = probs->data.data();
  for (int64_t v = 0; v < n; ++v) {
    int best = 0;
    float best_p = p[v];
    for (int64_t c = 1; c < C; ++c) {
      const float pc = p[c * n + v];
      if (pc > best_p) {
        best_p = pc;
        best = static_cast<int>(c);
      }
    }
    out.data[static_cast<size_t>(v)] = static_cast<uint8_t>(best);
  }
  return out;
}

EvaluationReport evaluate(const UNetModel<float>& model,
                          const std::vector<const SubjectRecord*>& test_set,
                          const RegionTable& table, double threshold) {
  if (test_set.empty()) throw ValueError("test set is empty");
  table.validate();

  EvaluationReport report;
  report.threshold = threshold;

  std::vector<LabelMap> preds;
  preds.reserve(test_set.size());
  std::array<double, kNumRegions> dice_sum{};
  std::array<int, kNumRegions> dice_count{};

  for (const SubjectRecord* rec : test_set) {
    preds.push_back(predict(model, rec->pet));
    const LabelMap& pred = preds.back();

    const DiceReport subject_dice = dice_report(pred, rec->labels);
    for (int r = 0; r < kNumRegions; ++r)
      if (subject_dice.per_region[static_cast<size_t>(r)]) {
        dice_sum[static_cast<size_t>(r)] += *subject_dice.per_region[static_cast<size_t>(r)];
        ++dice_count[static_cast<size_t>(r)];
      }

    report.subject_ids.push_back(rec->id);
    report.suvr_pred.push_back(suvr(rec->pet, pred, table));
    report.suvr_true.push_back(suvr(rec->pet, rec->labels, table));
    report.amyloid.push_back(rec->amyloid_positive ? 1 : 0);
  }

  double macro_sum = 0.0;
  int macro_count = 0;
  for (int r = 0; r < kNumRegions; ++r)
    if (dice_count[static_cast<size_t>(r)] > 0) {
      const double mean = dice_sum[static_cast<size_t>(r)] / dice_count[static_cast<size_t>(r)];
      report.dice_mean[static_cast<size_t>(r)] = mean;
      macro_sum += mean;
      ++macro_count;
    }
  report.macro_dice = macro_count > 0 ? macro_sum / macro_count : 0.0;

  std::vector<RegionSample> samples;
  samples.reserve(test_set.size());
  for (size_t i = 0; i < test_set.size(); ++i)
    samples.push_back({&test_set[i]->pet, &preds[i], &test_set[i]->labels});
  for (size_t c = 0; c < kTargetComposites.size(); ++c) {
    std::vector<std::string> warnings;
    report.nrmse[c] = nrmse_region(samples, table.composite(kTargetComposites[c]), &warnings);
    for (const auto& w : warnings)
      report.warnings.push_back(fmt::format("{}: {}", kTargetComposites[c], w));
  }

  report.roc_pred = roc(report.suvr_pred, report.amyloid);
  report.roc_true = roc(report.suvr_true, report.amyloid);
  report.classification = classify(report.suvr_pred, report.amyloid, threshold);
  return report;
}

}  // namespace petseg
