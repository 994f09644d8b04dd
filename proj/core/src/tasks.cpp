#include "gncde/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gncde {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

constexpr std::uint64_t kSplitStream = 30;
constexpr std::uint64_t kTrainPairStream = 40;
constexpr std::uint64_t kEvalPairStream = 41;
constexpr std::uint64_t kMaskStream = 50;

int attribute_width(const DynamicGraphObservations& obs) {
  return obs.node_states ? static_cast<int>(obs.node_states->front().cols()) : 0;
}

ModelSpec base_spec(const TaskConfig& cfg, int n) {
  ModelSpec s;
  s.variant = cfg.variant;
  s.n_nodes = n;
  s.embed_dim = cfg.embed_dim;
  s.layers = cfg.layers;
  s.hidden_dim = cfg.hidden_dim;
  s.direct_cap = cfg.direct_cap;
  s.activation = cfg.activation;
  return s;
}

DynamicGraphObservations masked_training(const DynamicGraphObservations& train, const TaskConfig& cfg) {
  if (cfg.mask_fraction <= 0.0) return train;
  const auto mask = random_channel_mask(train.n_nodes(), train.size(), cfg.mask_fraction,
                                        derive_seed(cfg.seed, kMaskStream));
  return mask_missing(train, mask);
}

TaskResult finish(TaskResult r) {
  if (const EvalRecord* e = r.report.last_eval()) r.metrics = e->metrics;
  if (r.report.diverged) {
    r.failed = true;
    r.message = r.report.message;
  }
  return r;
}

std::vector<int> labels_of(const std::vector<std::vector<int>>& labels, std::size_t k) { return labels[k]; }

}  // namespace

// ---------------------------------------------------------------------------
// Split

void SplitSpec::validate(std::size_t total) const {
  if (train_count < 1) throw ParameterError("split.train: need at least one training snapshot");
  if (interp_count < 0 || extrap_count < 0) throw ParameterError("split: counts must be non-negative");
  if (static_cast<std::size_t>(train_count + interp_count + extrap_count) != total)
    throw ParameterError("split: train + interp + extrap = " +
                         std::to_string(train_count + interp_count + extrap_count) + " but the dataset has " +
                         std::to_string(total) + " snapshots");
  const int block = train_count + interp_count;
  if (interp_count > 0 && interp_count > block - 2)
    throw ParameterError("split.interp: interpolation targets must leave the first and last training snapshots");
}

Split split(std::size_t total, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate(total);
  const std::size_t block = static_cast<std::size_t>(spec.train_count + spec.interp_count);
  Split s;
  std::vector<std::size_t> interior;
  for (std::size_t i = 1; i + 1 < block; ++i) interior.push_back(i);
  Rng rng(seed);
  rng.shuffle(interior);
  std::vector<bool> is_interp(block, false);
  for (int k = 0; k < spec.interp_count; ++k) is_interp[interior[static_cast<std::size_t>(k)]] = true;
  for (std::size_t i = 0; i < block; ++i) (is_interp[i] ? s.interp : s.train).push_back(i);
  for (std::size_t i = block; i < total; ++i) s.extrap.push_back(i);
  return s;
}

AttributeProblem make_attribute_problem(const DynamicGraphObservations& obs, const Split& s) {
  return {obs.select(s.train), obs.select(s.interp), obs.select(s.extrap)};
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "attributes") return TaskKind::attributes;
  if (s == "classify") return TaskKind::classify;
  if (s == "link") return TaskKind::link;
  throw ParameterError("unknown task '" + s + "' (expected attributes, classify or link)");
}

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::attributes: return "attributes";
    case TaskKind::classify: return "classify";
    case TaskKind::link: return "link";
  }
  return "?";
}

void TaskConfig::validate() const {
  solver.validate();
  train.validate();
  if (embed_dim < 1) throw ParameterError("model.embed_dim: must be positive");
  if (layers < 1) throw ParameterError("model.layers: must be at least 1");
  if (classes < 2) throw ParameterError("task.classes: need at least two classes");
  if (!(mask_fraction >= 0.0 && mask_fraction < 1.0)) throw ParameterError("task.mask_fraction: must be in [0, 1)");
  if (train.iterations > 0 && solver.method == Method::dopri5)
    throw CapabilityError("solver.method = dopri5 cannot be differentiated; train with rk4 or euler");
}

// ---------------------------------------------------------------------------
// Metrics

double accuracy(const Matrix& scores, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(scores.rows()) != labels.size() || labels.empty())
    throw ParameterError("accuracy: need one label per row");
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    if (best == labels[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ParameterError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks over ties.
  double rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        positives += 1.0;
      }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw ParameterError("auc: need both positive and negative pairs");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

std::vector<std::vector<int>> quantile_labels(const DynamicGraphObservations& obs, int classes) {
  if (!obs.node_states) throw ParameterError("quantile_labels: observations carry no node states");
  if (classes < 2) throw ParameterError("quantile_labels: need at least two classes");
  const int n = obs.n_nodes();
  std::vector<std::vector<int>> out;
  for (const Matrix& x : *obs.node_states) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a, 0) < x(b, 0); });
    std::vector<int> lab(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) lab[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r * classes / n;
    out.push_back(std::move(lab));
  }
  return out;
}

PairSet edge_pairs_with_negatives(const Topology& topology, Rng& rng) {
  const int n = topology.n_nodes();
  PairSet p;
  std::vector<std::pair<int, int>> non_edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (topology.adjacency(i, j) != 0.0) {
        p.src.push_back(i);
        p.dst.push_back(j);
        p.label.push_back(1);
      } else {
        non_edges.emplace_back(i, j);
      }
    }
  const std::size_t want = std::min(p.src.size(), non_edges.size());
  // Partial Fisher-Yates: the first `want` entries become a uniform sample.
  for (std::size_t k = 0; k < want; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(non_edges.size() - k));
    std::swap(non_edges[k], non_edges[pick]);
    p.src.push_back(non_edges[k].first);
    p.dst.push_back(non_edges[k].second);
    p.label.push_back(0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Task runners

TaskResult run_node_attribute_task(const DynamicGraphObservations& obs, const TaskConfig& cfg) {
  cfg.validate();
  obs.validate();
  if (!obs.node_states) throw ParameterError("attribute task: dataset has no node states");
  TaskResult r;
  r.task = TaskKind::attributes;
  r.split = split(obs.size(), cfg.split, derive_seed(cfg.seed, kSplitStream));
  AttributeProblem problem = make_attribute_problem(obs, r.split);
  problem.train = masked_training(problem.train, cfg);
  r.spec = attribute_model_spec(cfg.variant, obs.n_nodes(), cfg.embed_dim, cfg.layers, attribute_width(obs));
  r.spec.hidden_dim = cfg.hidden_dim;
  r.spec.direct_cap = cfg.direct_cap;
  r.spec.activation = cfg.activation;
  r.report = train_attributes(problem, r.spec, cfg.solver, cfg.scheme, cfg.train, cfg.seed);
  r = finish(std::move(r));
  if (!r.failed) {
    const ForwardModel model = attribute_forward_model(r.spec, cfg.solver, problem.train, cfg.scheme);
    std::vector<double> times = problem.interp.times();
    const auto et = problem.extrap.times();
    times.insert(times.end(), et.begin(), et.end());
    const std::vector<Matrix> preds = model.predict(r.report.final_params.weights, times);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const bool interp = k < problem.interp.size();
      const Matrix& target = interp ? (*problem.interp.node_states)[k]
                                    : (*problem.extrap.node_states)[k - problem.interp.size()];
      r.per_snapshot.push_back({interp ? "interp" : "extrap", times[k], (preds[k] - target).cwiseAbs().mean()});
    }
  }
  return r;
}

TaskResult run_node_classification_task(const DynamicGraphObservations& obs,
                                        const std::vector<std::vector<int>>& labels, const TaskConfig& cfg) {
  cfg.validate();
  obs.validate();
  if (labels.size() != obs.size()) throw ParameterError("classification task: need labels for every snapshot");
  for (const auto& row : labels) {
    if (static_cast<int>(row.size()) != obs.n_nodes())
      throw ParameterError("classification task: need one label per node");
    for (int c : row)
      if (c < 0 || c >= cfg.classes) throw ParameterError("classification task: label outside [0, classes)");
  }
  TaskResult r;
  r.task = TaskKind::classify;
  r.split = split(obs.size(), cfg.split, derive_seed(cfg.seed, kSplitStream));
  const DynamicGraphObservations train = masked_training(obs.select(r.split.train), cfg);
  const int width = attribute_width(obs);
  r.spec = base_spec(cfg, obs.n_nodes());
  r.spec.head = Head::classify;
  r.spec.out_dim = cfg.classes;
  r.spec.feature_dim = width;
  r.spec.init_feature_dim = width;
  FeaturePath features;
  Matrix f0;
  if (width > 0) {
    features = FeaturePath(train.times(), *train.node_states);
    f0 = train.node_states->front();
  }
  const ForwardModel model(r.spec, cfg.solver, train, cfg.scheme, features, f0);

  const std::vector<double> train_times = train.times();
  const std::vector<double> extrap_times = obs.select(r.split.extrap).times();
  const std::vector<double> interp_times = obs.select(r.split.interp).times();

  Objective obj;
  obj.loss = [&](Tape&, const Weights<Var>& w) {
    const std::vector<Var> logits = model.predict(w, train_times);
    std::vector<Var> terms;
    for (std::size_t k = 0; k < logits.size(); ++k)
      terms.push_back(softmax_cross_entropy(logits[k], labels_of(labels, r.split.train[k])));
    return lincomb(std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())), terms);
  };
  auto block_accuracy = [&](const std::vector<Matrix>& logits, const std::vector<std::size_t>& idx,
                            std::size_t offset, const char* block, std::vector<SnapshotMetric>* per) {
    double hits = 0.0;
    double count = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Matrix probs = softmax_rows(logits[offset + k]);
      const double acc = accuracy(probs, labels_of(labels, idx[k]));
      hits += acc * static_cast<double>(probs.rows());
      count += static_cast<double>(probs.rows());
      if (per) per->push_back({block, obs.snapshots[idx[k]].time, acc});
    }
    return hits / count;
  };
  auto evaluate = [&](const Weights<Matrix>& w, std::vector<SnapshotMetric>* per) {
    std::vector<double> times = interp_times;
    times.insert(times.end(), extrap_times.begin(), extrap_times.end());
    Metrics m;
    if (times.empty()) return m;
    const std::vector<Matrix> logits = model.predict(w, times);
    if (!interp_times.empty()) m["interp_accuracy"] = block_accuracy(logits, r.split.interp, 0, "interp", per);
    if (!extrap_times.empty())
      m["accuracy"] = block_accuracy(logits, r.split.extrap, interp_times.size(), "extrap", per);
    return m;
  };
  obj.evaluate = [&](const Weights<Matrix>& w) { return evaluate(w, nullptr); };
  r.report = optimize(init_params(r.spec, cfg.seed), obj, cfg.train);
  r = finish(std::move(r));
  if (!r.failed) evaluate(r.report.final_params.weights, &r.per_snapshot);
  return r;
}

TaskResult run_link_prediction_task(const DynamicGraphObservations& obs, const TaskConfig& cfg) {
  cfg.validate();
  obs.validate();
  TaskResult r;
  r.task = TaskKind::link;
  r.split = split(obs.size(), cfg.split, derive_seed(cfg.seed, kSplitStream));
  if (r.split.extrap.empty()) throw ParameterError("link task: the extrapolation window is empty");
  std::size_t positives = 0;
  for (std::size_t k : r.split.extrap) positives += obs.snapshots[k].topology.edge_count();
  if (positives == 0) throw ParameterError("link task: no edges in the extrapolation window");

  const DynamicGraphObservations train = masked_training(obs.select(r.split.train), cfg);
  const int width = attribute_width(obs);
  r.spec = base_spec(cfg, obs.n_nodes());
  r.spec.head = Head::link;
  r.spec.out_dim = 1;
  r.spec.feature_dim = width;
  r.spec.init_feature_dim = width;
  FeaturePath features;
  Matrix f0;
  if (width > 0) {
    features = FeaturePath(train.times(), *train.node_states);
    f0 = train.node_states->front();
  }
  const ForwardModel model(r.spec, cfg.solver, train, cfg.scheme, features, f0);

  // Training pairs use the observed (unmasked) structure of each training
  // snapshot; negatives are drawn once and kept for the whole run.
  std::vector<PairSet> train_pairs;
  {
    Rng rng(derive_seed(cfg.seed, kTrainPairStream));
    for (std::size_t k : r.split.train) train_pairs.push_back(edge_pairs_with_negatives(obs.snapshots[k].topology, rng));
  }
  const std::vector<double> train_times = train.times();
  const std::vector<double> extrap_times = obs.select(r.split.extrap).times();

  Objective obj;
  obj.loss = [&](Tape&, const Weights<Var>& w) {
    const std::vector<Var> z = model.embeddings(w, train_times);
    std::vector<Var> terms;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const PairSet& p = train_pairs[k];
      if (p.src.empty()) continue;
      Matrix y(static_cast<Eigen::Index>(p.label.size()), 1);
      for (std::size_t i = 0; i < p.label.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = p.label[i];
      terms.push_back(bce_with_logits(decode_links(r.spec, w, z[k], p.src, p.dst), y));
    }
    if (terms.empty()) throw ParameterError("link task: no edges in any training snapshot");
    return lincomb(std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())), terms);
  };
  auto evaluate = [&](const Weights<Matrix>& w, std::vector<SnapshotMetric>* per) {
    Rng rng(derive_seed(cfg.seed, kEvalPairStream));
    const std::vector<Matrix> z = model.embeddings(w, extrap_times);
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const PairSet p = edge_pairs_with_negatives(obs.snapshots[r.split.extrap[k]].topology, rng);
      if (p.src.empty()) continue;
      const Matrix s = decode_links(r.spec, w, z[k], p.src, p.dst);
      std::vector<double> snap(s.data(), s.data() + s.size());
      scores.insert(scores.end(), snap.begin(), snap.end());
      labels.insert(labels.end(), p.label.begin(), p.label.end());
      if (per && std::count(p.label.begin(), p.label.end(), 0) > 0)
        per->push_back({"extrap", extrap_times[k], auc(snap, p.label)});
    }
    Metrics m;
    m["auc"] = auc(scores, labels);
    return m;
  };
  obj.evaluate = [&](const Weights<Matrix>& w) { return evaluate(w, nullptr); };
  r.report = optimize(init_params(r.spec, cfg.seed), obj, cfg.train);
  r = finish(std::move(r));
  if (!r.failed) evaluate(r.report.final_params.weights, &r.per_snapshot);
  return r;
}

TaskResult run_task(const DynamicGraphObservations& obs, const TaskConfig& cfg) {
  switch (cfg.task) {
    case TaskKind::attributes: return run_node_attribute_task(obs, cfg);
    case TaskKind::classify: return run_node_classification_task(obs, quantile_labels(obs, cfg.classes), cfg);
    case TaskKind::link: return run_link_prediction_task(obs, cfg);
  }
  throw ParameterError("unknown task");
}

// ---------------------------------------------------------------------------
// Serialisation

std::string TaskResult::to_json() const {
  json j;
  j["task"] = to_string(task);
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["metrics"] = m;
  json per = json::array();
  for (const auto& s : per_snapshot) per.push_back({{"block", s.block}, {"time", s.time}, {"value", s.value}});
  j["per_snapshot"] = per;
  j["split"] = {{"train", split.train}, {"interp", split.interp}, {"extrap", split.extrap}};
  j["failed"] = failed;
  if (failed) j["message"] = message;
  j["training"] = json::parse(report.to_json());
  return j.dump(2) + "\n";
}

std::string results_csv_header() {
  return "task,dynamics,topology,variant,scheme,seed,interp_l1,extrap_l1,sum_l1,accuracy,auc,wall_seconds,status\n";
}

std::string results_csv_row(const TaskResult& r, const std::string& dynamics, const std::string& topology,
                            const std::string& variant, const std::string& scheme, std::uint64_t seed,
                            double wall_seconds) {
  auto cell = [&](const char* key) {
    auto it = r.metrics.find(key);
    return it == r.metrics.end() ? std::string() : format_double(it->second);
  };
  std::ostringstream out;
  out << to_string(r.task) << ',' << dynamics << ',' << topology << ',' << variant << ',' << scheme << ',' << seed
      << ',' << cell("interp_l1") << ',' << cell("extrap_l1") << ',' << cell("sum_l1") << ',' << cell("accuracy")
      << ',' << cell("auc") << ',' << format_double(wall_seconds) << ',' << (r.failed ? "failed" : "ok") << '\n';
  return out.str();
}

}  // namespace gncde
