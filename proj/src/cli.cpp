#include "petseg/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "petseg/common.hpp"
#include "petseg/config.hpp"
#include "petseg/metrics.hpp"
#include "petseg/nifti.hpp"
#include "petseg/report.hpp"
#include "petseg/train.hpp"
#include "petseg/unet.hpp"

namespace petseg {
namespace {

namespace fs = std::filesystem;

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig::defaults() : RunConfig::from_file(path);
}

SplitIndices config_split(const RunConfig& cfg, size_t n_subjects) {
  return split(static_cast<int>(n_subjects), cfg.train.split_fractions, cfg.train.seed);
}

int cmd_generate(int n, double prevalence, const std::string& out_dir, uint64_t seed,
                 bool seed_given, const std::string& config_path) {
  RunConfig cfg = load_config(config_path);
  const uint64_t cohort_seed = seed_given ? seed : cfg.phantom.seed;

  const auto cohort = generate_cohort(n, prevalence, cfg.phantom, cohort_seed);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("{}: cannot create directory ({})", out_dir, ec.message()));

  std::vector<ManifestEntry> entries;
  int positives = 0;
  for (const auto& rec : cohort) {
    const std::string pet_name = rec.id + "_pet.nii";
    const std::string seg_name = rec.id + "_seg.nii";
    write_nifti(rec.pet, (fs::path(out_dir) / pet_name).string());
    write_nifti(rec.labels, (fs::path(out_dir) / seg_name).string());
    entries.push_back({rec.id, pet_name, seg_name, rec.amyloid_positive});
    positives += rec.amyloid_positive;
  }
  write_manifest(entries, (fs::path(out_dir) / "manifest.tsv").string());

  fmt::print("generated {} subjects ({} positive) dims=[{},{},{}] -> {}\n", cohort.size(),
             positives, cfg.phantom.dims[0], cfg.phantom.dims[1], cfg.phantom.dims[2], out_dir);
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_path) {
  RunConfig cfg = load_config(config_path);
  const auto subjects = load_subjects(read_manifest(manifest_path));
  const auto parts = config_split(cfg, subjects.size());

  auto model = build_unet<float>(cfg.unet, cfg.train.seed);
  TrainConfig train_cfg = cfg.train;
  train_cfg.checkpoint_path = out_path;

  const auto history = train(model, gather(subjects, parts.train), gather(subjects, parts.val),
                             train_cfg);
  write_history_csv(history, out_path + ".history.csv");

  const auto& best = history.epochs[static_cast<size_t>(history.best_epoch - 1)];
  fmt::print("trained {} epochs (stop: {}), best epoch {} with val loss {}\n",
             history.stopped_epoch, history.stop_reason, history.best_epoch,
             format_number(best.val_loss));
  return 0;
}

int cmd_segment(const std::string& weights_path, const std::string& pet_path,
                const std::string& out_path, const std::string& config_path) {
  const UNetConfig* expected = nullptr;
  UNetConfig from_config;
  if (!config_path.empty()) {
    from_config = RunConfig::from_file(config_path).unet;
    expected = &from_config;
  }
  const auto model = load_weights(weights_path, expected);
  const Volume pet = read_nifti_volume(pet_path);
  write_nifti(predict(model, pet), out_path);
  fmt::print("segmented {} -> {}\n", pet_path, out_path);
  return 0;
}

int cmd_evaluate(const std::string& weights_path, const std::string& manifest_path,
                 const std::string& split_name, const std::string& out_dir,
                 const std::string& config_path) {
  RunConfig cfg = load_config(config_path);
  const auto model = load_weights(weights_path);
  const auto subjects = load_subjects(read_manifest(manifest_path));

  std::vector<const SubjectRecord*> subset;
  if (split_name == "all") {
    for (const auto& rec : subjects) subset.push_back(&rec);
  } else {
    const auto parts = config_split(cfg, subjects.size());
    const std::vector<int>* indices = nullptr;
    if (split_name == "train")
      indices = &parts.train;
    else if (split_name == "val")
      indices = &parts.val;
    else if (split_name == "test")
      indices = &parts.test;
    else
      throw ConfigError(fmt::format("unknown split \"{}\" (train, val, test or all)", split_name));
    subset = gather(subjects, *indices);
  }

  const RegionTable table = cfg.region_table();
  const auto report = evaluate(model, subset, table, cfg.positivity_threshold);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("{}: cannot create directory ({})", out_dir, ec.message()));
  const fs::path dir(out_dir);
  write_dice_csv(report, table, (dir / "dice.csv").string());
  write_nrmse_csv(report, (dir / "nrmse.csv").string());
  write_roc_csv(report.roc_pred, (dir / "roc.csv").string());
  write_summary_csv(report, (dir / "summary.csv").string());
  write_roc_svg(report.roc_pred, (dir / "roc.svg").string());

  for (const auto& warning : report.warnings) fmt::print(stderr, "warning: {}\n", warning);
  fmt::print("evaluated {} subjects: macro_dice={} auc={} accuracy={} -> {}\n", subset.size(),
             format_number(report.macro_dice), format_number(report.roc_pred.auc),
             format_number(report.classification.accuracy), out_dir);
  return 0;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("{}: cannot open manifest", path));
  const fs::path base = fs::path(path).parent_path();

  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    ManifestEntry entry;
    std::string flag;
    if (!(tokens >> entry.id)) continue;  // blank line
    if (!(tokens >> entry.pet_path >> entry.label_path >> flag))
      throw IoError(fmt::format("{}:{}: expected id, pet path, label path and flag", path,
                                line_no));
    std::string extra;
    if (tokens >> extra)
      throw IoError(fmt::format("{}:{}: unexpected trailing field \"{}\"", path, line_no, extra));
    if (flag == "1" || flag == "true")
      entry.positive = true;
    else if (flag == "0" || flag == "false")
      entry.positive = false;
    else
      throw IoError(fmt::format("{}:{}: positive flag must be 0/1, got \"{}\"", path, line_no,
                                flag));
    for (std::string* p : {&entry.pet_path, &entry.label_path})
      if (fs::path(*p).is_relative()) *p = (base / *p).string();
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) throw IoError(fmt::format("{}: manifest lists no subjects", path));
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path));
  for (const auto& e : entries)
    out << e.id << '\t' << e.pet_path << '\t' << e.label_path << '\t' << (e.positive ? 1 : 0)
        << '\n';
  if (!out.flush()) throw IoError(fmt::format("{}: write failed", path));
}

std::vector<SubjectRecord> load_subjects(const std::vector<ManifestEntry>& entries) {
  std::vector<SubjectRecord> subjects;
  subjects.reserve(entries.size());
  for (const auto& e : entries) {
    SubjectRecord rec;
    rec.id = e.id;
    rec.pet = read_nifti_volume(e.pet_path);
    rec.labels = read_nifti_labelmap(e.label_path);
    rec.amyloid_positive = e.positive;
    try {
      validate_pair(rec.pet, rec.labels);
    } catch (const ValueError& err) {
      throw IoError(fmt::format("subject {}: {}", e.id, err.what()));
    }
    subjects.push_back(std::move(rec));
  }
  return subjects;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"PET brain segmentation and amyloid quantification"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a phantom cohort as NIfTI pairs + manifest");
  int gen_n = 0;
  double gen_prevalence = 0.5;
  std::string gen_out;
  uint64_t gen_seed = 0;
  std::string gen_config;
  gen->add_option("--n", gen_n, "number of subjects")->required()->check(CLI::PositiveNumber);
  gen->add_option("--prevalence", gen_prevalence, "fraction of amyloid-positive subjects");
  gen->add_option("--out", gen_out, "output directory")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "cohort seed (default: phantom.seed)");
  gen->add_option("--config", gen_config, "config file");

  // train
  auto* tr = app.add_subcommand("train", "Train the segmentation network on a manifest");
  std::string tr_manifest, tr_config, tr_out;
  tr->add_option("--manifest", tr_manifest, "subject manifest")->required();
  tr->add_option("--config", tr_config, "config file");
  tr->add_option("--out", tr_out, "checkpoint output path")->required();

  // segment
  auto* seg = app.add_subcommand("segment", "Segment one PET volume");
  std::string seg_weights, seg_pet, seg_out, seg_config;
  seg->add_option("--weights", seg_weights, "trained weights")->required();
  seg->add_option("--pet", seg_pet, "input PET NIfTI")->required();
  seg->add_option("--out", seg_out, "output label NIfTI")->required();
  seg->add_option("--config", seg_config, "config file (checked against the weights)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a trained model on a manifest split");
  std::string ev_weights, ev_manifest, ev_split = "test", ev_out, ev_config;
  ev->add_option("--weights", ev_weights, "trained weights")->required();
  ev->add_option("--manifest", ev_manifest, "subject manifest")->required();
  ev->add_option("--split", ev_split, "train, val, test or all (default test)");
  ev->add_option("--out-dir", ev_out, "report output directory")->required();
  ev->add_option("--config", ev_config, "config file");

  // config dump
  auto* cfg_cmd = app.add_subcommand("config", "Configuration helpers");
  cfg_cmd->require_subcommand(1);
  auto* dump_cmd = cfg_cmd->add_subcommand("dump", "Print the effective config, canonical form");
  std::string dump_config;
  dump_cmd->add_option("--config", dump_config, "config file (default: built-in defaults)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_generate(gen_n, gen_prevalence, gen_out, gen_seed, gen_seed_opt->count() > 0,
                          gen_config);
    if (tr->parsed()) return cmd_train(tr_manifest, tr_config, tr_out);
    if (seg->parsed()) return cmd_segment(seg_weights, seg_pet, seg_out, seg_config);
    if (ev->parsed()) return cmd_evaluate(ev_weights, ev_manifest, ev_split, ev_out, ev_config);
    if (dump_cmd->parsed()) {
      fmt::print("{}", load_config(dump_config).dump());
      return 0;
    }
  } catch (const ConfigError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  } catch (const NumericError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 3;
  } catch (const IoError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 1;
  } catch (const ValueError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 1;
  }
  return 2;
}

}  // namespace petseg
