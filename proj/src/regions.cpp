#include "petseg/regions.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "petseg/common.hpp"

namespace petseg {
namespace {

const char* kBuiltinNames[kNumRegions] = {
    "Cerebral white matter",
    "Cerebellar white matter",
    "Brain stem",
    "Corpus callosum",
    "Thalamus",
    "Caudate + Accumbens",
    "Putamen",
    "Pallidum",
    "Hippocampus",
    "Amygdala",
    "Cerebellar gray matter",
    "Cuneus + Lingual + Pericalcarine",
    "Entorhinal",
    "Fusiform + Parahippocampal",
    "Inferior temporal",
    "Lateral occipital",
    "Lateral orbitofrontal",
    "Medial orbitofrontal",
    "Middle temporal",
    "Paracentral + Precentral",
    "Caudal middle frontal",
    "Rostral + Caudal anterior cingulate",
    "Posterior cingulate + Isthmus cingulate",
    "Precuneus",
    "Rostral middle frontal",
    "Superior frontal",
    "Superior temporal",
    "Inferior parietal + Postcentral",
    "Insula + Transverse temporal",
    "Cerebrospinal fluid",
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_region_id(const std::string& token, const std::string& path, int line_no) {
  int id = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), id);
  if (ec != std::errc{} || ptr != token.data() + token.size())
    throw ConfigError(fmt::format("{}:{}: expected a region id, got \"{}\"", path, line_no, token));
  if (id < 1 || id > kNumRegions)
    throw ConfigError(fmt::format("{}:{}: region id {} outside 1..{}", path, line_no, id, kNumRegions));
  return id;
}

}  // namespace

const std::string& RegionTable::name(int id) const {
  if (id < 1 || id > static_cast<int>(names.size()))
    throw ValueError(fmt::format("region id {} outside 1..{}", id, names.size()));
  return names[static_cast<size_t>(id - 1)];
}

const std::vector<int>& RegionTable::composite(const std::string& key) const {
  auto it = composites.find(key);
  if (it == composites.end()) throw ValueError(fmt::format("unknown composite \"{}\"", key));
  return it->second;
}

std::vector<int> RegionTable::target_cortical() const {
  std::set<int> ids;
  for (const char* key : kTargetComposites) {
    const auto& members = composite(key);
    ids.insert(members.begin(), members.end());
  }
  return {ids.begin(), ids.end()};
}

void RegionTable::validate() const {
  if (static_cast<int>(names.size()) != kNumRegions)
    throw ValueError(fmt::format("region table names {} ids, expected {}", names.size(), kNumRegions));
  for (int id = 1; id <= kNumRegions; ++id)
    if (names[static_cast<size_t>(id - 1)].empty())
      throw ValueError(fmt::format("region id {} has no name", id));
  for (const auto& [key, members] : composites) {
    if (members.empty()) throw ValueError(fmt::format("composite \"{}\" is empty", key));
    for (int id : members)
      if (id < 1 || id > kNumRegions)
        throw ValueError(fmt::format("composite \"{}\" references invalid region id {}", key, id));
  }
  for (const char* key : kTargetComposites)
    if (composites.find(key) == composites.end())
      throw ValueError(fmt::format("composite \"{}\" is not defined", key));
  if (reference_id < 1 || reference_id > kNumRegions)
    throw ValueError(fmt::format("reference region id {} outside 1..{}", reference_id, kNumRegions));
}

RegionTable RegionTable::builtin() {
  RegionTable table;
  table.names.assign(kBuiltinNames, kBuiltinNames + kNumRegions);
  table.composites["precuneus"] = {24};
  table.composites["prefrontal"] = {17, 18, 21, 25, 26};
  table.composites["gyrus_rectus"] = {18};
  table.composites["lateral_temporal"] = {15, 19, 27};
  table.reference_id = 11;
  table.validate();
  return table;
}

RegionTable RegionTable::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("{}: cannot open region table", path));

  RegionTable table;
  table.names.assign(kNumRegions, "");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    std::istringstream tokens(line);
    std::string first;
    tokens >> first;
    if (first == "@composite") {
      std::string key;
      tokens >> key;
      if (key.empty())
        throw ConfigError(fmt::format("{}:{}: @composite needs a name and ids", path, line_no));
      std::vector<int> members;
      std::string token;
      while (tokens >> token) members.push_back(parse_region_id(token, path, line_no));
      if (members.empty())
        throw ConfigError(fmt::format("{}:{}: composite \"{}\" lists no ids", path, line_no, key));
      if (!table.composites.emplace(key, std::move(members)).second)
        throw ConfigError(fmt::format("{}:{}: composite \"{}\" defined twice", path, line_no, key));
    } else if (first == "@reference") {
      std::string token;
      tokens >> token;
      if (token.empty())
        throw ConfigError(fmt::format("{}:{}: @reference needs a region id", path, line_no));
      if (table.reference_id != 0)
        throw ConfigError(fmt::format("{}:{}: reference region defined twice", path, line_no));
      table.reference_id = parse_region_id(token, path, line_no);
    } else if (first.size() && first[0] == '@') {
      throw ConfigError(fmt::format("{}:{}: unknown directive \"{}\"", path, line_no, first));
    } else {
      const int id = parse_region_id(first, path, line_no);
      std::string rest;
      std::getline(tokens, rest);
      rest = trim(rest);
      if (rest.empty())
        throw ConfigError(fmt::format("{}:{}: region id {} has no name", path, line_no, id));
      auto& slot = table.names[static_cast<size_t>(id - 1)];
      if (!slot.empty())
        throw ConfigError(fmt::format("{}:{}: region id {} defined twice", path, line_no, id));
      slot = std::move(rest);
    }
  }

  for (int id = 1; id <= kNumRegions; ++id)
    if (table.names[static_cast<size_t>(id - 1)].empty())
      throw ConfigError(fmt::format("{}: region id {} is missing", path, id));
  try {
    table.validate();
  } catch (const ValueError& err) {
    throw ConfigError(fmt::format("{}: {}", path, err.what()));
  }
  return table;
}

}  // namespace petseg
