#pragma once

#include <string>

#include "petseg/metrics.hpp"
#include "petseg/regions.hpp"
#include "petseg/train.hpp"

namespace petseg {

/// Shortest decimal representation that round-trips the value (so emitted
/// files are byte-stable across runs).
std::string format_number(double value);

void write_history_csv(const TrainHistory& history, const std::string& path);
void write_dice_csv(const EvaluationReport& report, const RegionTable& table,
                    const std::string& path);
void write_nrmse_csv(const EvaluationReport& report, const std::string& path);
void write_roc_csv(const RocCurve& curve, const std::string& path);
void write_summary_csv(const EvaluationReport& report, const std::string& path);
void write_roc_svg(const RocCurve& curve, const std::string& path);

}  // namespace petseg
