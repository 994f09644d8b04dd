#include "gncde/train.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gncde {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxCachedStages = 200000;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Matrix states_at(const DynamicGraphObservations& obs, std::size_t k) {
  if (!obs.node_states) throw ParameterError("observations carry no node states");
  return (*obs.node_states)[k];
}

}  // namespace

// ---------------------------------------------------------------------------
// ForwardModel

ForwardModel::ForwardModel(ModelSpec spec, SolverConfig solver, const DynamicGraphObservations& observations,
                           Scheme scheme, FeaturePath features, Matrix init_features)
    : spec_(std::move(spec)),
      solver_(solver),
      path_(build_path(observations, scheme)),
      features_(std::move(features)),
      init_features_(std::move(init_features)) {
  spec_.validate();
  solver_.validate();
  if (observations.n_nodes() != spec_.n_nodes)
    throw ParameterError("forward model: observations have " + std::to_string(observations.n_nodes()) +
                         " nodes, model expects " + std::to_string(spec_.n_nodes));
  a_t0_ = observations.snapshots.front().topology.adjacency;
  const double time_span = t_last() - t0();
  const double param_span = path_.param_end() - path_.param_begin();
  const double step_time = solver_.step > 0.0 ? solver_.step : time_span / 400.0;
  param_step_ = step_time * param_span / time_span;
}

const StageInput& ForwardModel::stage(double s, Side side) const {
  const auto key = std::make_pair(s, static_cast<int>(side));
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  // Adaptive solves visit fresh points on every call; the previous stage is
  // no longer referenced once a new one is requested, so dropping the cache
  // here is safe.
  if (cache_.size() >= kMaxCachedStages) cache_.clear();
  const FeaturePath* f = features_.empty() ? nullptr : &features_;
  return cache_.emplace(key, make_stage_input(spec_, path_, f, s, side, solver_.extrapolation)).first->second;
}

template <class T>
std::vector<T> ForwardModel::embeddings(const Weights<T>& w, const std::vector<double>& times) const {
  if (times.empty()) return {};
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.front() < t0()) throw RangeError("forward model: query time precedes the first observation");
  std::vector<double> params;
  params.reserve(sorted.size());
  for (double t : sorted) params.push_back(path_.param_of_time(t));

  const T z0 = init_embedding(spec_, w, t0(), a_t0_, init_features_);
  SolverConfig cfg = solver_;
  cfg.step = param_step_;
  const FieldFn<T> f = [&](double s, Side side, const T& z) { return field(spec_, w, stage(s, side), z); };
  Trajectory<T> traj = integrate<T>(f, z0, path_.param_begin(), path_.knot_params(), params, cfg);
  stats_ = traj.stats;

  std::vector<T> out;
  out.reserve(times.size());
  for (double t : times) {
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back(traj.states[static_cast<std::size_t>(pos)]);
  }
  return out;
}

template <class T>
std::vector<T> ForwardModel::predict(const Weights<T>& w, const std::vector<double>& times) const {
  std::vector<T> z = embeddings(w, times);
  std::vector<T> out;
  out.reserve(z.size());
  for (const T& zk : z) out.push_back(decode(spec_, w, zk));
  return out;
}

template std::vector<Matrix> ForwardModel::embeddings<Matrix>(const Weights<Matrix>&,
                                                              const std::vector<double>&) const;
template std::vector<Var> ForwardModel::embeddings<Var>(const Weights<Var>&, const std::vector<double>&) const;
template std::vector<Matrix> ForwardModel::predict<Matrix>(const Weights<Matrix>&, const std::vector<double>&) const;
template std::vector<Var> ForwardModel::predict<Var>(const Weights<Var>&, const std::vector<double>&) const;

// ---------------------------------------------------------------------------
// Optimiser

LossKind parse_loss_kind(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "l1") return LossKind::l1;
  throw ParameterError("unknown loss '" + s + "' (expected mse or l1)");
}

std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "l1"; }

void TrainConfig::validate() const {
  if (iterations < 0) throw ParameterError("train.iterations: must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("train.lr: must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ParameterError("train.beta1: must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("train.beta2: must be in [0, 1)");
  if (!(eps > 0.0)) throw ParameterError("train.eps: must be positive");
  if (eval_every < 1) throw ParameterError("train.eval_every: must be >= 1");
  if (!std::isfinite(clip_norm)) throw ParameterError("train.clip_norm: must be finite");
}

AdamState AdamState::for_params(const Weights<Matrix>& params, const TrainConfig& cfg) {
  AdamState s;
  s.lr = cfg.lr;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.eps = cfg.eps;
  params.visit([&](const std::string&, const Matrix& m) {
    s.first_moment.push_back(Matrix::Zero(m.rows(), m.cols()));
    s.second_moment.push_back(Matrix::Zero(m.rows(), m.cols()));
  });
  return s;
}

void adam_step(AdamState& state, Weights<Matrix>& params, const Weights<Matrix>& grads) {
  std::vector<const Matrix*> g;
  grads.visit([&](const std::string&, const Matrix& m) { g.push_back(&m); });
  std::size_t count = 0;
  params.visit([&](const std::string&, Matrix&) { ++count; });
  if (g.size() != count || state.first_moment.size() != count)
    throw ParameterError("adam_step: parameter, gradient and state layouts differ");
  for (const Matrix* m : g)
    if (!m->allFinite())
      throw DivergenceError("non-finite gradient at optimiser step " + std::to_string(state.step_count + 1),
                            std::numeric_limits<double>::quiet_NaN());
  ++state.step_count;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  std::size_t i = 0;
  params.visit([&](const std::string& name, Matrix& p) {
    const Matrix& gi = *g[i];
    if (gi.rows() != p.rows() || gi.cols() != p.cols()) throw ParameterError("adam_step: shape mismatch for " + name);
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * gi;
    v = state.beta2 * v + (1.0 - state.beta2) * gi.cwiseProduct(gi);
    p.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    ++i;
  });
}

double global_norm(const Weights<Matrix>& grads) {
  double sq = 0.0;
  grads.visit([&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

double clip_gradients(Weights<Matrix>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && std::isfinite(norm) && norm > max_norm) {
    const double factor = max_norm / norm;
    grads.visit([&](const std::string&, Matrix& m) { m *= factor; });
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop

double TrainReport::total_seconds() const {
  return std::accumulate(iteration_seconds.begin(), iteration_seconds.end(), 0.0);
}

std::string TrainReport::to_json() const {
  json j;
  j["variant"] = variant;
  j["iterations_requested"] = iterations_requested;
  j["iterations_completed"] = iterations_completed;
  j["train_loss"] = train_loss;
  json evs = json::array();
  for (const auto& e : evals) {
    json m = json::object();
    for (const auto& [k, v] : e.metrics) m[k] = v;
    evs.push_back({{"iteration", e.iteration}, {"metrics", m}});
  }
  j["evaluations"] = evs;
  j["diverged"] = diverged;
  if (diverged) {
    j["divergence_time"] = std::isfinite(divergence_time) ? json(divergence_time) : json(nullptr);
    j["message"] = message;
  }
  j["parameter_count"] = final_params.size();
  j["model"] = json::parse(model_spec_to_json(final_params.spec));
  return j.dump(2) + "\n";
}

std::string TrainReport::curves_csv() const {
  std::set<std::string> keys;
  for (const auto& e : evals)
    for (const auto& [k, v] : e.metrics) keys.insert(k);
  std::ostringstream out;
  out << "iteration,train_loss";
  for (const auto& k : keys) out << ',' << k;
  out << '\n';
  std::size_t next = 0;
  for (std::size_t it = 0; it < train_loss.size(); ++it) {
    out << it << ',' << format_double(train_loss[it]);
    const EvalRecord* e = nullptr;
    if (next < evals.size() && evals[next].iteration == static_cast<int>(it)) e = &evals[next++];
    for (const auto& k : keys) {
      out << ',';
      if (e != nullptr) {
        auto f = e->metrics.find(k);
        if (f != e->metrics.end()) out << format_double(f->second);
      }
    }
    out << '\n';
  }
  return out.str();
}

TrainReport optimize(VectorFieldParams params, const Objective& objective, const TrainConfig& cfg) {
  cfg.validate();
  params.validate();
  if (!objective.loss) throw ParameterError("optimize: objective has no loss");
  TrainReport r;
  r.variant = to_string(params.spec.variant);
  r.iterations_requested = cfg.iterations;
  AdamState adam = AdamState::for_params(params.weights, cfg);
  try {
    for (int it = 0;; ++it) {
      const auto start = std::chrono::steady_clock::now();
      Tape tape;
      const Weights<Var> w = to_tape(params.weights, tape);
      const Var loss = objective.loss(tape, w);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value))
        throw DivergenceError("non-finite training loss at iteration " + std::to_string(it),
                              std::numeric_limits<double>::quiet_NaN());
      r.train_loss.push_back(value);
      if (objective.evaluate && (it % cfg.eval_every == 0 || it == cfg.iterations))
        r.evals.push_back({it, objective.evaluate(params.weights)});
      if (it == cfg.iterations) break;
      tape.backward(loss);
      Weights<Matrix> g = gradients(w, tape);
      clip_gradients(g, cfg.clip_norm);
      adam_step(adam, params.weights, g);
      r.iteration_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      ++r.iterations_completed;
    }
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.divergence_time = e.time();
    r.message = e.what();
  } catch (const NumericalError& e) {
    r.diverged = true;
    r.divergence_time = std::numeric_limits<double>::quiet_NaN();
    r.message = e.what();
  }
  r.final_params = std::move(params);
  return r;
}

// ---------------------------------------------------------------------------
// Node attribute regression

ModelSpec attribute_model_spec(Variant variant, int n_nodes, int embed_dim, int layers, int attribute_dim) {
  ModelSpec s;
  s.variant = variant;
  s.head = Head::attributes;
  s.n_nodes = n_nodes;
  s.embed_dim = embed_dim;
  s.layers = layers;
  s.out_dim = attribute_dim;
  s.init_feature_dim = attribute_dim;
  return s;
}

ForwardModel attribute_forward_model(const ModelSpec& spec, const SolverConfig& solver,
                                     const DynamicGraphObservations& train, Scheme scheme) {
  return ForwardModel(spec, solver, train, scheme, FeaturePath(), states_at(train, 0));
}

Var attribute_loss(const ForwardModel& model, Tape& tape, const Weights<Var>& w,
                   const DynamicGraphObservations& targets, LossKind kind) {
  (void)tape;
  const std::vector<double> times = targets.times();
  const std::vector<Var> preds = model.predict(w, times);
  std::vector<Var> terms;
  terms.reserve(preds.size());
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const Matrix target = states_at(targets, k);
    terms.push_back(kind == LossKind::mse ? mse(preds[k], target) : l1(preds[k], target));
  }
  return lincomb(std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())), terms);
}

Metrics score_attribute_predictions(const std::vector<Matrix>& preds, const AttributeProblem& problem) {
  if (preds.size() != problem.interp.size() + problem.extrap.size())
    throw ParameterError("attribute metrics: prediction count differs from target count");
  Metrics m;
  double total_abs = 0.0;
  double total_count = 0.0;
  auto block = [&](const DynamicGraphObservations& obs, std::size_t offset, const char* key) {
    if (obs.size() == 0) return 0.0;
    double abs_sum = 0.0;
    double count = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const Matrix target = states_at(obs, k);
      if (preds[offset + k].rows() != target.rows() || preds[offset + k].cols() != target.cols())
        throw ParameterError("attribute metrics: prediction shape differs from target");
      abs_sum += (preds[offset + k] - target).cwiseAbs().sum();
      count += static_cast<double>(target.size());
    }
    total_abs += abs_sum;
    total_count += count;
    m[key] = abs_sum / count;
    return abs_sum / count;
  };
  const double interp = block(problem.interp, 0, "interp_l1");
  const double extrap = block(problem.extrap, problem.interp.size(), "extrap_l1");
  m["sum_l1"] = interp + extrap;
  if (total_count > 0.0) m["pooled_l1"] = total_abs / total_count;
  return m;
}

Metrics attribute_metrics(const ForwardModel& model, const Weights<Matrix>& w, const AttributeProblem& problem) {
  std::vector<double> times = problem.interp.times();
  const std::vector<double> extrap_times = problem.extrap.times();
  times.insert(times.end(), extrap_times.begin(), extrap_times.end());
  return score_attribute_predictions(model.predict(w, times), problem);
}

TrainReport train_attributes(const AttributeProblem& problem, const ModelSpec& spec, const SolverConfig& solver,
                             Scheme scheme, const TrainConfig& cfg, std::uint64_t seed) {
  const ForwardModel model = attribute_forward_model(spec, solver, problem.train, scheme);
  Objective obj;
  obj.loss = [&](Tape& tape, const Weights<Var>& w) { return attribute_loss(model, tape, w, problem.train, cfg.loss); };
  obj.evaluate = [&](const Weights<Matrix>& w) { return attribute_metrics(model, w, problem); };
  return optimize(init_params(spec, seed), obj, cfg);
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckResult gradient_check(const VectorFieldParams& params,
                               const std::function<Var(Tape&, const Weights<Var>&)>& loss, std::size_t coordinates,
                               double h, std::uint64_t seed, double floor) {
  if (!(h > 0.0)) throw ParameterError("gradient_check: h must be positive");
  Tape tape;
  const Weights<Var> w = to_tape(params.weights, tape);
  tape.backward(loss(tape, w));
  VectorFieldParams grads{params.spec, gradients(w, tape)};
  const Vector g = grads.flatten();
  const Vector x = params.flatten();

  std::vector<std::size_t> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(std::min(coordinates, idx.size()));

  auto value_at = [&](const Vector& flat) {
    VectorFieldParams p = params;
    p.unflatten(flat);
    Tape t;
    return loss(t, to_tape(p.weights, t)).value()(0, 0);
  };

  GradCheckResult r;
  for (std::size_t i : idx) {
    Vector xp = x;
    Vector xm = x;
    xp[static_cast<Eigen::Index>(i)] += h;
    xm[static_cast<Eigen::Index>(i)] -= h;
    const double fd = (value_at(xp) - value_at(xm)) / (2.0 * h);
    const double an = g[static_cast<Eigen::Index>(i)];
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
    r.coordinates.push_back(i);
    r.analytic.push_back(an);
    r.numeric.push_back(fd);
    r.rel_error.push_back(rel);
    r.max_rel_error = std::max(r.max_rel_error, rel);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json spec_json(const ModelSpec& s) {
  return {{"variant", to_string(s.variant)},
          {"activation", to_string(s.activation)},
          {"head", to_string(s.head)},
          {"n_nodes", s.n_nodes},
          {"embed_dim", s.embed_dim},
          {"out_dim", s.out_dim},
          {"layers", s.layers},
          {"feature_dim", s.feature_dim},
          {"init_feature_dim", s.init_feature_dim},
          {"hidden_dim", s.hidden_dim},
          {"direct_cap", s.direct_cap},
          {"structural_scale", s.structural_scale}};
}

ModelSpec spec_from(const json& j) {
  ModelSpec s;
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.head = parse_head(j.at("head").get<std::string>());
  s.n_nodes = j.at("n_nodes").get<int>();
  s.embed_dim = j.at("embed_dim").get<int>();
  s.out_dim = j.at("out_dim").get<int>();
  s.layers = j.at("layers").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  s.init_feature_dim = j.at("init_feature_dim").get<int>();
  s.hidden_dim = j.at("hidden_dim").get<int>();
  s.direct_cap = j.at("direct_cap").get<int>();
  s.structural_scale = j.at("structural_scale").get<double>();
  s.validate();
  return s;
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = "gncde-checkpoint-1";
  j["task"] = c.task;
  j["model"] = spec_json(c.spec);
  j["scheme"] = to_string(c.scheme);
  j["solver"] = {{"method", to_string(c.solver.method)},
                 {"step", c.solver.step},
                 {"rtol", c.solver.rtol},
                 {"atol", c.solver.atol},
                 {"max_steps", c.solver.max_steps},
                 {"extrapolation", to_string(c.solver.extrapolation)}};
  j["train_indices"] = c.train_indices;
  j["seed"] = c.seed;
  json tensors = json::array();
  c.weights.visit([&](const std::string& name, const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", data}});
  });
  j["tensors"] = tensors;
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "gncde-checkpoint-1")
      throw ParameterError("checkpoint: unsupported format");
    Checkpoint c;
    c.task = j.at("task").get<std::string>();
    c.spec = spec_from(j.at("model"));
    c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    const json& s = j.at("solver");
    c.solver.method = parse_method(s.at("method").get<std::string>());
    c.solver.step = s.at("step").get<double>();
    c.solver.rtol = s.at("rtol").get<double>();
    c.solver.atol = s.at("atol").get<double>();
    c.solver.max_steps = s.at("max_steps").get<std::size_t>();
    c.solver.extrapolation = parse_extrapolation_mode(s.at("extrapolation").get<std::string>());
    c.solver.validate();
    c.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
    c.seed = j.at("seed").get<std::uint64_t>();

    VectorFieldParams p = init_params(c.spec, 0);
    std::map<std::string, const json*> by_name;
    for (const json& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    std::size_t used = 0;
    p.weights.visit([&](const std::string& name, Matrix& m) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ParameterError("checkpoint: missing tensor '" + name + "'");
      const json& t = *it->second;
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParameterError("checkpoint: tensor '" + name + "' has the wrong shape");
      m = Eigen::Map<const Matrix>(data.data(), rows, cols);
      ++used;
    });
    if (used != by_name.size()) throw ParameterError("checkpoint: unexpected extra tensors");
    c.weights = std::move(p.weights);
    return c;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(c);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace gncde
