#pragma once

// Subcommand implementations behind the gncde executable. Each returns the
// process exit code; configuration problems are thrown as ParameterError
// (exit 2), file problems as IoError (exit 3) and numerical failures as
// NumericalError (exit 4) and mapped by the caller.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace gncde::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kIoError = 3, kNumericalError = 4 };

struct GenerateOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;  // replaces [dataset] seed
};

struct TrainOptions {
  std::string config;
  std::string dataset;  // generated from the config when empty
  std::string out;      // [output] dir when empty
  std::optional<std::uint64_t> seed;  // replaces the first [train] seeds entry
};

struct GridOptions {
  std::vector<std::string> configs;  // .ini files or directories of them
  std::string out;                   // aggregated CSV; per-run rows go next to it
  int jobs = 1;
  std::optional<std::uint64_t> seed;  // replaces every config's seed list
};

struct SurfaceOptions {
  std::string checkpoint;
  std::string dataset;
  std::string times = "knots";  // knots, uniform:<count> or a comma list
  std::string nodes = "all";    // all or a comma list giving the row order
  std::string out;
};

int cmd_generate(const GenerateOptions& opt, std::ostream& log);
int cmd_train(const TrainOptions& opt, std::ostream& log);
int cmd_grid(const GridOptions& opt, std::ostream& log);
int cmd_surface(const SurfaceOptions& opt, std::ostream& log);

/// One parsed line of a per-run results CSV.
using CsvRow = std::map<std::string, std::string>;

std::vector<CsvRow> read_csv(const std::string& text);

/// Groups per-run rows by config and writes mean and population std
/// (ddof = 0) of every metric over the runs that did not fail.
std::string aggregate_results(const std::vector<CsvRow>& runs);

/// Expands directories to their .ini files (sorted) and keeps files as given.
std::vector<std::string> expand_config_paths(const std::vector<std::string>& paths);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace gncde::cli
