#pragma once

// End-to-end pipelines: node attribute regression, dynamic node
// classification and temporal link prediction, with their splits and
// metrics.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gncde/dyngraph.hpp"
#include "gncde/train.hpp"

namespace gncde {

struct SplitSpec {
  int train_count = 80;
  int interp_count = 20;
  int extrap_count = 20;

  void validate(std::size_t total) const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> interp;
  std::vector<std::size_t> extrap;
};

/// Extrapolation is the chronologically last block. Interpolation targets
/// are drawn without replacement from the interior of the remaining block
/// (never its first or last snapshot), so they lie strictly inside the
/// training time range. Training gets the rest, in time order.
Split split(std::size_t total, const SplitSpec& spec, std::uint64_t seed);

AttributeProblem make_attribute_problem(const DynamicGraphObservations& obs, const Split& s);

enum class TaskKind { attributes, classify, link };

TaskKind parse_task_kind(const std::string& s);
std::string to_string(TaskKind k);

/// Everything a task run needs besides the data.
struct TaskConfig {
  TaskKind task = TaskKind::attributes;
  Variant variant = Variant::gncde_approx;
  Scheme scheme = Scheme::natural_cubic;
  int embed_dim = 20;
  int layers = 1;
  int hidden_dim = 0;
  int direct_cap = 20;
  Activation activation = Activation::relu;
  SolverConfig solver;
  TrainConfig train;
  SplitSpec split;
  int classes = 4;             // classification
  double mask_fraction = 0.0;  // fraction of adjacency channels hidden per training snapshot
  std::uint64_t seed = 0;      // split, initialisation, masks and negative samples

  void validate() const;
};

struct SnapshotMetric {
  std::string block;  // interp or extrap
  double time = 0.0;
  double value = 0.0;
};

struct TaskResult {
  TaskKind task = TaskKind::attributes;
  Metrics metrics;
  std::vector<SnapshotMetric> per_snapshot;
  TrainReport report;
  Split split;
  ModelSpec spec;
  bool failed = false;
  std::string message;

  std::string to_json() const;
};

/// Applies a channel mask to the training snapshots when mask_fraction > 0.
TaskResult run_node_attribute_task(const DynamicGraphObservations& obs, const TaskConfig& cfg);

/// labels[k][i] in [0, cfg.classes) for snapshot k and node i. Node
/// attributes, when present, are interpolated as input features.
TaskResult run_node_classification_task(const DynamicGraphObservations& obs,
                                        const std::vector<std::vector<int>>& labels, const TaskConfig& cfg);

TaskResult run_link_prediction_task(const DynamicGraphObservations& obs, const TaskConfig& cfg);

TaskResult run_task(const DynamicGraphObservations& obs, const TaskConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics and helpers

/// Fraction of rows whose argmax equals the label. Ties go to the lowest
/// class index.
double accuracy(const Matrix& scores, const std::vector<int>& labels);

/// Area under the ROC curve with ties counted as one half. Throws
/// ParameterError without both positives and negatives.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Per-snapshot quantile bins of the first attribute column: node i gets
/// floor(rank_i * classes / n) with ranks by ascending value, ties broken by
/// node index.
std::vector<std::vector<int>> quantile_labels(const DynamicGraphObservations& obs, int classes);

struct PairSet {
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> label;  // 1 edge, 0 sampled non-edge
};

/// All edges (i < j) of the snapshot plus the same number of distinct
/// non-edges drawn uniformly.
PairSet edge_pairs_with_negatives(const Topology& topology, Rng& rng);

std::string results_csv_header();
std::string results_csv_row(const TaskResult& r, const std::string& dynamics, const std::string& topology,
                            const std::string& variant, const std::string& scheme, std::uint64_t seed,
                            double wall_seconds);

}  // namespace gncde
