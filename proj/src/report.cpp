#include "petseg/report.hpp"

#include <charconv>
#include <cstdio>
#include <memory>
#include <system_error>

#include <fmt/format.h>

#include "petseg/common.hpp"

namespace petseg {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

class TextFile {
 public:
  explicit TextFile(const std::string& path) : path_(path), file_(std::fopen(path.c_str(), "wb")) {
    if (!file_) throw IoError(fmt::format("{}: cannot open for writing", path));
  }

  void write(const std::string& text) {
    if (std::fwrite(text.data(), 1, text.size(), file_.get()) != text.size())
      throw IoError(fmt::format("{}: write failed", path_));
  }

  void close() {
    if (std::fflush(file_.get()) != 0) throw IoError(fmt::format("{}: write failed", path_));
    file_.reset();
  }

 private:
  std::string path_;
  std::unique_ptr<std::FILE, FileCloser> file_;
};

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw ValueError("number formatting failed");
  return std::string(buf, ptr);
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  TextFile out(path);
  out.write("epoch,train_loss,val_loss\n");
  for (size_t e = 0; e < history.epochs.size(); ++e)
    out.write(fmt::format("{},{},{}\n", e + 1, format_number(history.epochs[e].train_loss),
                          format_number(history.epochs[e].val_loss)));
  out.close();
}

void write_dice_csv(const EvaluationReport& report, const RegionTable& table,
                    const std::string& path) {
  TextFile out(path);
  out.write("region_id,region,dice\n");
  for (int id = 1; id <= kNumRegions; ++id) {
    const auto& d = report.dice_mean[static_cast<size_t>(id - 1)];
    out.write(fmt::format("{},{},{}\n", id, table.name(id), d ? format_number(*d) : "nan"));
  }
  out.close();
}

void write_nrmse_csv(const EvaluationReport& report, const std::string& path) {
  TextFile out(path);
  out.write("composite,nrmse\n");
  for (size_t c = 0; c < kTargetComposites.size(); ++c)
    out.write(fmt::format("{},{}\n", kTargetComposites[c], format_number(report.nrmse[c])));
  out.close();
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
  TextFile out(path);
  out.write("threshold,fpr,tpr\n");
  for (const auto& p : curve.points)
    out.write(fmt::format("{},{},{}\n", format_number(p.threshold), format_number(p.fpr),
                          format_number(p.tpr)));
  out.close();
}

void write_summary_csv(const EvaluationReport& report, const std::string& path) {
  TextFile out(path);
  out.write("metric,value\n");
  out.write(fmt::format("auc,{}\n", format_number(report.roc_pred.auc)));
  out.write(fmt::format("accuracy,{}\n", format_number(report.classification.accuracy)));
  out.write(fmt::format("threshold,{}\n", format_number(report.threshold)));
  out.write(fmt::format("macro_dice,{}\n", format_number(report.macro_dice)));
  out.write(fmt::format("sensitivity,{}\n", format_number(report.classification.sensitivity)));
  out.write(fmt::format("specificity,{}\n", format_number(report.classification.specificity)));
  out.close();
}

void write_roc_svg(const RocCurve& curve, const std::string& path) {
  constexpr double kSize = 480.0;
  constexpr double kMargin = 40.0;
  const auto px = [&](double fpr) { return kMargin + fpr * kSize; };
  const auto py = [&](double tpr) { return kMargin + (1.0 - tpr) * kSize; };

  TextFile out(path);
  out.write(fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" "
      "viewBox=\"0 0 {0} {0}\">\n",
      format_number(kSize + 2 * kMargin)));
  out.write(fmt::format(
      "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      format_number(kMargin), format_number(kMargin), format_number(kSize), format_number(kSize)));
  out.write(fmt::format(
      "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" "
      "stroke-dasharray=\"4 4\"/>\n",
      format_number(px(0.0)), format_number(py(0.0)), format_number(px(1.0)),
      format_number(py(1.0))));

  std::string polyline = "  <polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < curve.points.size(); ++i) {
    if (i) polyline += ' ';
    polyline += fmt::format("{},{}", format_number(px(curve.points[i].fpr)),
                            format_number(py(curve.points[i].tpr)));
  }
  polyline += "\"/>\n";
  out.write(polyline);

  out.write(fmt::format(
      "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"14\">false positive rate</text>\n",
      format_number(kMargin + kSize / 2), format_number(kMargin + kSize + 30)));
  out.write(fmt::format(
      "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"14\" transform=\"rotate(-90 {} {})\">true positive rate</text>\n",
      format_number(12.0), format_number(kMargin + kSize / 2), format_number(12.0),
      format_number(kMargin + kSize / 2)));
  out.write(fmt::format(
      "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\">AUC = {}</text>\n",
      format_number(kMargin + kSize - 140), format_number(kMargin + kSize - 12),
      format_number(curve.auc)));
  out.write("</svg>\n");
  out.close();
}

}  // namespace petseg
