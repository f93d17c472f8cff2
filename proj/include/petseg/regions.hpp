#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "petseg/volume.hpp"

namespace petseg {

/// The four cortical composites whose uptake drives amyloid quantification,
/// in report order.
inline constexpr std::array<const char*, 4> kTargetComposites = {
    "precuneus", "prefrontal", "gyrus_rectus", "lateral_temporal"};

/// Names for label ids 1..30 plus the composite definitions used for SUVR
/// and regional uptake reporting. Id 0 is background and carries no name.
struct RegionTable {
  std::vector<std::string> names;                    // names[id-1] for id 1..30
  std::map<std::string, std::vector<int>> composites;
  int reference_id = 0;

  const std::string& name(int id) const;
  const std::vector<int>& composite(const std::string& key) const;

  /// Sorted union of the four target composites.
  std::vector<int> target_cortical() const;

  /// Checks ids 1..30 are all named, composites stay in range, the four
  /// target composites exist and the reference id is valid.
  void validate() const;

  static RegionTable builtin();
  static RegionTable from_file(const std::string& path);
};

}  // namespace petseg
