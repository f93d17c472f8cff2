#pragma once

#include <string>
#include <vector>

#include "petseg/phantom.hpp"

namespace petseg {

struct ManifestEntry {
  std::string id;
  std::string pet_path;
  std::string label_path;
  bool positive = false;
};

/// Reads the tab/space separated subject list (id, pet path, label path,
/// positive flag). Relative paths are resolved against the manifest's
/// directory.
std::vector<ManifestEntry> read_manifest(const std::string& path);

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

/// Loads each entry's NIfTI pair and validates alignment.
std::vector<SubjectRecord> load_subjects(const std::vector<ManifestEntry>& entries);

/// Entry point behind the `petseg` executable. Exit codes: 0 success,
/// 1 I/O failure, 2 usage/config error, 3 numeric failure during training.
int cli_main(int argc, const char* const* argv);

}  // namespace petseg
