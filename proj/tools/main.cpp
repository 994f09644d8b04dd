#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "commands.hpp"

using namespace gncde;
using namespace gncde::cli;

namespace {

void apply_thread_limit() {
  const char* env = std::getenv("GNCDE_THREADS");
  if (env == nullptr) return;
  const int n = std::atoi(env);
  if (n >= 1) Eigen::setNbThreads(n);
}

std::optional<std::uint64_t> seed_of(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_limit();
  CLI::App app{"Graph neural controlled differential equations on dynamic graphs"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Simulate a dynamic-graph dataset and write it as JSON");
  generate->add_option("--config", gen.config, "Experiment config (.ini)")->required();
  generate->add_option("--out", gen.out, "Dataset file to write")->required();
  auto* gen_seed_opt = generate->add_option("--seed", gen_seed, "Override the [dataset] seed");

  TrainOptions train;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write report, checkpoint and curves");
  train_cmd->add_option("--config", train.config, "Experiment config (.ini)")->required();
  train_cmd->add_option("--dataset", train.dataset, "Dataset JSON (generated from the config when omitted)");
  train_cmd->add_option("--out", train.out, "Output directory (defaults to [output] dir)");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Training seed");

  GridOptions grid;
  std::uint64_t grid_seed = 0;
  auto* grid_cmd = app.add_subcommand("grid", "Run every config for every seed and aggregate the results");
  grid_cmd->add_option("--config", grid.configs, "Config files or directories of .ini files")->required();
  grid_cmd->add_option("--out", grid.out, "Aggregated results CSV")->required();
  grid_cmd->add_option("--jobs", grid.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  auto* grid_seed_opt = grid_cmd->add_option("--seed", grid_seed, "Run only this seed");

  SurfaceOptions surface;
  auto* surface_cmd = app.add_subcommand("surface", "Emit true and predicted node values over a time grid");
  surface_cmd->add_option("--checkpoint", surface.checkpoint, "Checkpoint from train")->required();
  surface_cmd->add_option("--dataset", surface.dataset, "Dataset JSON")->required();
  surface_cmd->add_option("--times", surface.times, "knots, uniform:<count> or a comma-separated list");
  surface_cmd->add_option("--nodes", surface.nodes, "all or a comma-separated list of node indices");
  surface_cmd->add_option("--out", surface.out, "Surface CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*generate) {
      gen.seed = seed_of(gen_seed_opt, gen_seed);
      return cmd_generate(gen, std::cout);
    }
    if (*train_cmd) {
      train.seed = seed_of(train_seed_opt, train_seed);
      return cmd_train(train, std::cout);
    }
    if (*grid_cmd) {
      grid.seed = seed_of(grid_seed_opt, grid_seed);
      return cmd_grid(grid, std::cout);
    }
    if (*surface_cmd) return cmd_surface(surface, std::cout);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
