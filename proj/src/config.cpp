#include "petseg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "petseg/common.hpp"
#include "petseg/report.hpp"

namespace petseg {
namespace {

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& value, const std::string& context) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ConfigError(fmt::format("{}: cannot parse \"{}\" as a number", context, value));
  return out;
}

bool parse_bool(const std::string& value, const std::string& context) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got \"{}\"", context, value));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  return items;
}

template <typename T, size_t N>
std::array<T, N> parse_fixed_list(const std::string& value, const std::string& context) {
  const auto items = split_list(value);
  if (items.size() != N)
    throw ConfigError(fmt::format("{}: expected {} comma-separated values, got {}", context, N,
                                  items.size()));
  std::array<T, N> out{};
  for (size_t i = 0; i < N; ++i) out[i] = parse_number<T>(items[i], context);
  return out;
}

template <typename T>
std::string join_list(const T& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_integral_v<std::decay_t<decltype(values[0])>>)
      out += fmt::format("{}", values[i]);
    else
      out += format_number(values[i]);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  // The network type defaults to the published width; the tool defaults to a
  // width that trains in minutes on a desktop.
  cfg.unet.base_channels = 8;
  return cfg;
}

RunConfig RunConfig::parse(std::string_view text, const std::string& origin) {
  RunConfig cfg = defaults();

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"metrics.threshold",
       [&](const std::string& v, const std::string& c) {
         cfg.positivity_threshold = parse_number<double>(v, c);
       }},
      {"paths.regions",
       [&](const std::string& v, const std::string&) { cfg.regions_path = v; }},
      {"phantom.cortical_uplift",
       [&](const std::string& v, const std::string& c) {
         cfg.phantom.cortical_uplift = parse_number<double>(v, c);
       }},
      {"phantom.dims",
       [&](const std::string& v, const std::string& c) {
         cfg.phantom.dims = parse_fixed_list<int64_t, 3>(v, c);
       }},
      {"phantom.noise_sigma",
       [&](const std::string& v, const std::string& c) {
         cfg.phantom.noise_sigma = parse_number<double>(v, c);
       }},
      {"phantom.seed",
       [&](const std::string& v, const std::string& c) {
         cfg.phantom.seed = parse_number<uint64_t>(v, c);
       }},
      {"phantom.smooth_fwhm_vox",
       [&](const std::string& v, const std::string& c) {
         cfg.phantom.smooth_fwhm_vox = parse_number<double>(v, c);
       }},
      {"phantom.uptake_means",
       [&](const std::string& v, const std::string& c) {
         cfg.phantom.uptake_mean = parse_fixed_list<double, kNumRegions + 1>(v, c);
       }},
      {"train.adam_beta1",
       [&](const std::string& v, const std::string& c) {
         cfg.train.adam_beta1 = parse_number<double>(v, c);
       }},
      {"train.adam_beta2",
       [&](const std::string& v, const std::string& c) {
         cfg.train.adam_beta2 = parse_number<double>(v, c);
       }},
      {"train.adam_eps",
       [&](const std::string& v, const std::string& c) {
         cfg.train.adam_eps = parse_number<double>(v, c);
       }},
      {"train.batch_size",
       [&](const std::string& v, const std::string& c) {
         cfg.train.batch_size = parse_number<int>(v, c);
       }},
      {"train.class_weighting",
       [&](const std::string& v, const std::string& c) {
         cfg.train.class_weighting = parse_bool(v, c);
       }},
      {"train.lr",
       [&](const std::string& v, const std::string& c) {
         cfg.train.lr = parse_number<double>(v, c);
       }},
      {"train.max_epochs",
       [&](const std::string& v, const std::string& c) {
         cfg.train.max_epochs = parse_number<int>(v, c);
       }},
      {"train.patience",
       [&](const std::string& v, const std::string& c) {
         cfg.train.patience = parse_number<int>(v, c);
       }},
      {"train.seed",
       [&](const std::string& v, const std::string& c) {
         cfg.train.seed = parse_number<uint64_t>(v, c);
       }},
      {"train.split",
       [&](const std::string& v, const std::string& c) {
         cfg.train.split_fractions = parse_fixed_list<double, 3>(v, c);
       }},
      {"unet.base_channels",
       [&](const std::string& v, const std::string& c) {
         cfg.unet.base_channels = parse_number<int>(v, c);
       }},
      {"unet.in_channels",
       [&](const std::string& v, const std::string& c) {
         cfg.unet.in_channels = parse_number<int>(v, c);
       }},
      {"unet.num_classes",
       [&](const std::string& v, const std::string& c) {
         cfg.unet.num_classes = parse_number<int>(v, c);
       }},
  };

  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;

    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected key = value, got \"{}\"", origin, line_no,
                                    stripped));
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const std::string context = fmt::format("{}:{}: {}", origin, line_no, key);

    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError(fmt::format("{}:{}: unknown key \"{}\"", origin, line_no, key));
    if (auto [pos, inserted] = seen.emplace(key, line_no); !inserted)
      throw ConfigError(fmt::format("{}:{}: key \"{}\" already set on line {}", origin, line_no,
                                    key, pos->second));
    it->second(value, context);
  }

  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("{}: cannot open config", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

std::string RunConfig::dump() const {
  std::string out;
  const auto emit = [&](const std::string& key, const std::string& value) {
    if (value.empty())
      out += fmt::format("{} =\n", key);
    else
      out += fmt::format("{} = {}\n", key, value);
  };
  emit("metrics.threshold", format_number(positivity_threshold));
  emit("paths.regions", regions_path);
  emit("phantom.cortical_uplift", format_number(phantom.cortical_uplift));
  emit("phantom.dims", join_list(phantom.dims));
  emit("phantom.noise_sigma", format_number(phantom.noise_sigma));
  emit("phantom.seed", fmt::format("{}", phantom.seed));
  emit("phantom.smooth_fwhm_vox", format_number(phantom.smooth_fwhm_vox));
  emit("phantom.uptake_means", join_list(phantom.uptake_mean));
  emit("train.adam_beta1", format_number(train.adam_beta1));
  emit("train.adam_beta2", format_number(train.adam_beta2));
  emit("train.adam_eps", format_number(train.adam_eps));
  emit("train.batch_size", fmt::format("{}", train.batch_size));
  emit("train.class_weighting", train.class_weighting ? "true" : "false");
  emit("train.lr", format_number(train.lr));
  emit("train.max_epochs", fmt::format("{}", train.max_epochs));
  emit("train.patience", fmt::format("{}", train.patience));
  emit("train.seed", fmt::format("{}", train.seed));
  emit("train.split", join_list(train.split_fractions));
  emit("unet.base_channels", fmt::format("{}", unet.base_channels));
  emit("unet.in_channels", fmt::format("{}", unet.in_channels));
  emit("unet.num_classes", fmt::format("{}", unet.num_classes));
  return out;
}

RegionTable RunConfig::region_table() const {
  return regions_path.empty() ? RegionTable::builtin() : RegionTable::from_file(regions_path);
}

void RunConfig::validate() const {
  try {
    phantom.validate();
    unet.validate();
    train.validate();
  } catch (const ValueError& err) {
    throw ConfigError(err.what());
  }
  if (!(positivity_threshold > 0.0))
    throw ConfigError(fmt::format("positivity threshold must be positive, got {}",
                                  positivity_threshold));
}

}  // namespace petseg
