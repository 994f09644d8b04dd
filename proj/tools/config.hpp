#pragma once

// Experiment configuration: a flat INI document with the sections
// [dataset], [model], [solver], [train], [split], [task] and [output].
// Every key is optional; omitted keys keep the defaults below. Unknown
// sections or keys are rejected with a message naming the field.

#include <cstdint>
#include <string>
#include <vector>

#include "gncde/dyngraph.hpp"
#include "gncde/tasks.hpp"

namespace gncde::cli {

struct ExperimentConfig {
  std::string name;  // file stem, used for output directories
  DatasetSpec dataset;
  TaskConfig task;
  /// Training seeds for grid runs. train uses the first unless --seed is given.
  std::vector<std::uint64_t> seeds{0};
  /// When false the split is scaled from 80/20/20 to the snapshot count.
  bool split_given = false;
  std::string output_dir = "out";

  /// Fills in the derived split and checks every field.
  void finalize();
};

/// Scales the 80/20/20 protocol to `total` snapshots (exact at 120).
SplitSpec proportional_split(int total);

ExperimentConfig parse_config(const std::string& text, const std::string& name = "config");
ExperimentConfig load_config(const std::string& path);

/// Canonical INI rendering with every key, so that a written config parses
/// back to the same experiment.
std::string config_to_ini(const ExperimentConfig& c);

}  // namespace gncde::cli
