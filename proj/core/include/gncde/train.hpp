#pragma once

// Training: a forward model that integrates node embeddings along a graph
// path and decodes them, the Adam optimiser, and a generic optimisation loop
// driven by an Objective (taped loss plus eager evaluation).

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gncde/dyngraph.hpp"
#include "gncde/solver.hpp"
#include "gncde/vfield.hpp"

namespace gncde {

/// Integrates Z from the first observation time through a path built from
/// the given observations. Stage inputs (interpolated structure, derivative,
/// normalisation) depend only on the stage parameter and side, so they are
/// computed once and reused across optimisation iterations.
class ForwardModel {
 public:
  ForwardModel(ModelSpec spec, SolverConfig solver, const DynamicGraphObservations& observations, Scheme scheme,
               FeaturePath features = {}, Matrix init_features = {});

  const ModelSpec& spec() const { return spec_; }
  const SolverConfig& solver() const { return solver_; }
  const GraphPath& path() const { return path_; }
  double t0() const { return path_.knot_times().front(); }
  double t_last() const { return path_.knot_times().back(); }
  /// Step in path-parameter units (solver.step is given in time units).
  double param_step() const { return param_step_; }

  /// Embeddings at arbitrary times >= t0, in the order given.
  template <class T>
  std::vector<T> embeddings(const Weights<T>& w, const std::vector<double>& times) const;

  /// Decoded node outputs (attributes or class logits) at the given times.
  template <class T>
  std::vector<T> predict(const Weights<T>& w, const std::vector<double>& times) const;

  const SolverStats& last_stats() const { return stats_; }
  std::size_t cached_stages() const { return cache_.size(); }

 private:
  const StageInput& stage(double s, Side side) const;

  ModelSpec spec_;
  SolverConfig solver_;
  GraphPath path_;
  FeaturePath features_;
  Matrix init_features_;
  Matrix a_t0_;
  double param_step_ = 0.0;
  mutable std::map<std::pair<double, int>, StageInput> cache_;
  mutable SolverStats stats_;
};

enum class LossKind { mse, l1 };

LossKind parse_loss_kind(const std::string& s);
std::string to_string(LossKind k);

struct TrainConfig {
  int iterations = 2000;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int eval_every = 20;
  double clip_norm = 10.0;  // <= 0 disables clipping
  LossKind loss = LossKind::mse;

  void validate() const;
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step_count = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const Weights<Matrix>& params, const TrainConfig& cfg);
};

/// Bias-corrected Adam update, in place. Throws DivergenceError on a
/// non-finite gradient entry.
void adam_step(AdamState& state, Weights<Matrix>& params, const Weights<Matrix>& grads);

/// Rescales grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_gradients(Weights<Matrix>& grads, double max_norm);

double global_norm(const Weights<Matrix>& grads);

using Metrics = std::map<std::string, double>;

struct Objective {
  std::function<Var(Tape&, const Weights<Var>&)> loss;
  std::function<Metrics(const Weights<Matrix>&)> evaluate;  // may be empty
};

struct EvalRecord {
  int iteration = 0;
  Metrics metrics;
};

struct TrainReport {
  std::string variant;
  int iterations_requested = 0;
  int iterations_completed = 0;
  /// Entry k is the training loss after k updates.
  std::vector<double> train_loss;
  std::vector<EvalRecord> evals;
  /// Wall-clock seconds per completed update. Kept out of the serialised
  /// report so that report files are reproducible byte for byte.
  std::vector<double> iteration_seconds;
  bool diverged = false;
  double divergence_time = 0.0;
  std::string message;
  VectorFieldParams final_params;

  const EvalRecord* last_eval() const { return evals.empty() ? nullptr : &evals.back(); }
  double total_seconds() const;
  std::string to_json() const;
  /// iteration, train_loss and one column per metric; metric cells are
  /// empty on iterations without an evaluation.
  std::string curves_csv() const;
};

/// Runs iterations of loss -> backward -> clip -> adam_step. Evaluates at
/// iteration 0, every eval_every iterations and at the end. Divergence during
/// the loss, gradient or update stops the loop and is reported, not thrown.
TrainReport optimize(VectorFieldParams params, const Objective& objective, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Node attribute regression

/// Training snapshots build the path and supply targets; interpolation and
/// extrapolation snapshots are only evaluated.
struct AttributeProblem {
  DynamicGraphObservations train;
  DynamicGraphObservations interp;
  DynamicGraphObservations extrap;
};

/// Model spec for the attribute task: c = attribute columns, the t0
/// attributes feed the initial embedding.
ModelSpec attribute_model_spec(Variant variant, int n_nodes, int embed_dim, int layers, int attribute_dim);

/// Mean loss over all training snapshots (including t0) of the decoded
/// attributes against the observed states.
Var attribute_loss(const ForwardModel& model, Tape& tape, const Weights<Var>& w,
                   const DynamicGraphObservations& targets, LossKind kind);

/// interp_l1, extrap_l1 (mean absolute error over all entries of each
/// block), their sum sum_l1, and pooled_l1 over both blocks together.
/// Empty blocks are omitted and contribute 0 to sum_l1.
Metrics attribute_metrics(const ForwardModel& model, const Weights<Matrix>& w, const AttributeProblem& problem);

/// The same metrics from precomputed predictions, interpolation block first.
Metrics score_attribute_predictions(const std::vector<Matrix>& preds, const AttributeProblem& problem);

ForwardModel attribute_forward_model(const ModelSpec& spec, const SolverConfig& solver,
                                     const DynamicGraphObservations& train, Scheme scheme);

TrainReport train_attributes(const AttributeProblem& problem, const ModelSpec& spec, const SolverConfig& solver,
                             Scheme scheme, const TrainConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradient checking and checkpoints

struct GradCheckResult {
  std::vector<std::size_t> coordinates;
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> rel_error;
  double max_rel_error = 0.0;
};

/// Compares tape gradients with central differences on `coordinates`
/// randomly chosen flat parameter indices. Relative error is
/// |g - fd| / max(|g|, |fd|, floor).
GradCheckResult gradient_check(const VectorFieldParams& params,
                               const std::function<Var(Tape&, const Weights<Var>&)>& loss, std::size_t coordinates,
                               double h, std::uint64_t seed, double floor = 1e-8);

struct Checkpoint {
  std::string task = "attributes";
  ModelSpec spec;
  Weights<Matrix> weights;
  Scheme scheme = Scheme::natural_cubic;
  SolverConfig solver;
  std::vector<std::size_t> train_indices;
  std::uint64_t seed = 0;
};

std::string checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

std::string model_spec_to_json(const ModelSpec& spec);

}  // namespace gncde
