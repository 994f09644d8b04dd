// Acceptance checks for the library and the command-line workflow. Prints
// one PASS/FAIL line per criterion and exits non-zero when a criterion fails
// that was not listed with --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "commands.hpp"
#include "config.hpp"
#include "gncde/dyngraph.hpp"
#include "gncde/path.hpp"
#include "gncde/solver.hpp"
#include "gncde/tasks.hpp"
#include "gncde/train.hpp"
#include "gncde/vfield.hpp"

using namespace gncde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Dataset churned_dataset(int n, int snapshots, std::uint64_t seed, double edge_prob = 0.4) {
  DatasetSpec s;
  s.topology = TopologyKind::random;
  s.topology_params.edge_prob = edge_prob;
  s.n_nodes = n;
  s.snapshots = snapshots;
  s.horizon = 1.0;
  s.churn_drop = 0.2;
  s.churn_add = 0.2;
  s.churn_events = 2;
  s.x0_high = 2.0;
  s.seed = seed;
  return generate_dataset(s);
}

// 1. Tape gradients against central differences for every variant.
Outcome gradients() {
  const Dataset d = churned_dataset(6, 5, 3);
  SolverConfig solver;
  solver.method = Method::rk4;
  solver.step = (d.observations.snapshots.back().time - d.observations.snapshots.front().time) / 20.0;
  Outcome out{true, ""};
  for (Variant v : {Variant::gncde_full, Variant::gncde_linear, Variant::gnode, Variant::neural_cde_plain,
                    Variant::gncde_approx, Variant::gncde_direct}) {
    const ModelSpec spec = attribute_model_spec(v, 6, 4, 1, 1);
    const ForwardModel model = attribute_forward_model(spec, solver, d.observations, Scheme::natural_cubic);
    const auto loss = [&](Tape& t, const Weights<Var>& w) {
      return attribute_loss(model, t, w, d.observations, LossKind::mse);
    };
    const GradCheckResult r = gradient_check(init_params(spec, 7), loss, 50, 1e-5, 11);
    const bool ok = r.max_rel_error < 1e-4 && r.coordinates.size() == 50;
    out.pass = out.pass && ok;
    out.detail += to_string(v) + "=" + fmt(r.max_rel_error) + " ";
  }
  out.detail += "(max relative error, limit 1e-4)";
  return out;
}

// 2. Convergence orders on dz/dt = -z and the adaptive tolerance.
Outcome solver_orders() {
  const OrderReport euler = order_check_exponential(Method::euler);
  const OrderReport rk4 = order_check_exponential(Method::rk4);
  SolverConfig cfg;
  cfg.method = Method::dopri5;
  cfg.rtol = 1e-6;
  cfg.atol = 1e-12;
  const FieldFn<Matrix> f = [](double, Side, const Matrix& z) { return Matrix(-z); };
  const auto traj = integrate<Matrix>(f, Matrix::Ones(1, 1), 0.0, {}, {1.0}, cfg);
  const double rel = std::abs(traj.states.back()(0, 0) / std::exp(-1.0) - 1.0);
  Outcome out;
  out.pass = !euler.degenerate && !rk4.degenerate && euler.order >= 0.9 && euler.order <= 1.1 &&
             rk4.order >= 3.7 && rk4.order <= 4.3 && rel <= 1e-6;
  out.detail = "euler order " + fmt(euler.order) + ", rk4 order " + fmt(rk4.order) + ", dopri5 relative error " +
               fmt(rel) + " in " + std::to_string(traj.stats.steps_taken) + " steps";
  return out;
}

Matrix single_edge(int n, int i, int j) {
  Matrix a = Matrix::Zero(n, n);
  a(i, j) = a(j, i) = 1.0;
  return a;
}

// 3. Interpolation contracts.
Outcome interpolation() {
  DatasetSpec spec;
  spec.n_nodes = 12;
  spec.snapshots = 25;
  spec.topology = TopologyKind::random;
  spec.topology_params.edge_prob = 0.3;
  spec.churn_drop = 0.3;
  spec.churn_add = 0.1;
  spec.churn_events = 6;
  spec.seed = 5;
  const DynamicGraphObservations obs = generate_dataset(spec).observations;

  double knot_err = 0.0;
  for (Scheme s : {Scheme::linear, Scheme::rectilinear, Scheme::natural_cubic, Scheme::cubic_hermite}) {
    const GraphPath path = build_path(obs, s);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const PathValue v = path.eval(path.knot_params()[k]);
      knot_err = std::max(knot_err, std::abs(v.time - obs.snapshots[k].time));
      knot_err = std::max(knot_err, max_abs(v.adjacency - obs.snapshots[k].topology.adjacency));
    }
  }

  const std::vector<double> times{0.0, 0.7, 1.1, 2.0, 2.6};
  DynamicGraphObservations small;
  const std::vector<Matrix> mats{single_edge(3, 0, 1), single_edge(3, 1, 2), single_edge(3, 0, 2),
                                 single_edge(3, 0, 1), single_edge(3, 1, 2)};
  for (std::size_t k = 0; k < times.size(); ++k) small.snapshots.push_back({times[k], Topology(mats[k])});
  const GraphPath cubic = build_path(small, Scheme::natural_cubic);
  double c2_err = 0.0;
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const Matrix left = cubic.eval_second_derivative(times[k], Side::left).d_adjacency;
    const Matrix right = cubic.eval_second_derivative(times[k], Side::right).d_adjacency;
    const Matrix d_left = cubic.eval_derivative(times[k], Side::left).d_adjacency;
    const Matrix d_right = cubic.eval_derivative(times[k], Side::right).d_adjacency;
    c2_err = std::max({c2_err, max_abs(left - right), max_abs(d_left - d_right)});
  }
  const GraphPath cubic_big = build_path(obs, Scheme::natural_cubic);
  for (std::size_t k = 1; k + 1 < obs.size(); ++k) {
    const double s = cubic_big.knot_params()[k];
    const Matrix left = cubic_big.eval_second_derivative(s, Side::left).d_adjacency;
    const Matrix right = cubic_big.eval_second_derivative(s, Side::right).d_adjacency;
    c2_err = std::max(c2_err, max_abs(left - right));
  }

  const GraphPath hermite = build_path(obs, Scheme::cubic_hermite);
  double hermite_err = 0.0;
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const PathDerivative d = hermite.eval_derivative(hermite.knot_params()[k + 1], Side::left);
    const Matrix expected = obs.snapshots[k + 1].topology.adjacency - obs.snapshots[k].topology.adjacency;
    hermite_err = std::max(hermite_err, max_abs(d.d_adjacency - expected));
    hermite_err = std::max(hermite_err, std::abs(d.d_time - (obs.snapshots[k + 1].time - obs.snapshots[k].time)));
  }

  const GraphPath rect = build_path(obs, Scheme::rectilinear);
  bool lead_lag = true;
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const PathValue v = rect.eval(2.0 * static_cast<double>(k) + 1.0);
    lead_lag = lead_lag && v.time == obs.snapshots[k + 1].time && v.adjacency == obs.snapshots[k].topology.adjacency;
  }

  Outcome out;
  out.pass = knot_err <= 1e-12 && c2_err <= 1e-8 && hermite_err <= 1e-10 && lead_lag;
  out.detail = "knot error " + fmt(knot_err) + ", C2 jump " + fmt(c2_err) + ", Hermite slope error " +
               fmt(hermite_err) + ", lead-lag " + (lead_lag ? "exact" : "violated");
  return out;
}

// Matrix exponential by scaling and squaring with a truncated Taylor series.
Matrix expm(const Matrix& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.1) ++squarings;
  const Matrix scaled = a / std::pow(2.0, squarings);
  Matrix result = Matrix::Identity(a.rows(), a.cols());
  Matrix term = result;
  for (int k = 1; k <= 20; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

// 4. Ground-truth dynamics against closed forms and invariants.
Outcome dynamics() {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = a(1, 0) = a(1, 2) = a(2, 1) = 1.0;
  const Matrix lap = Matrix(a.rowwise().sum().asDiagonal()) - a;
  Vector x0(3);
  x0 << 1.0, 0.0, 0.0;
  const StateSampler heat = simulate_heat(TopologySchedule::constant(Topology(a)), x0, 1.0, 1.0, 1e-10);
  double expm_err = 0.0;
  for (double t : {0.25, 0.5, 1.0}) expm_err = std::max(expm_err, max_abs(heat.eval(t) - expm(-t * lap) * x0));

  DatasetSpec spec;
  spec.n_nodes = 50;
  spec.topology = TopologyKind::small_world;
  spec.churn_drop = 0.2;
  spec.churn_add = 0.02;
  spec.churn_events = 4;
  spec.seed = 3;
  const GeneratedSystem sys = generate_system(spec);
  double conservation = 0.0;
  const auto& events = sys.schedule.event_times();
  std::vector<double> bounds{0.0};
  bounds.insert(bounds.end(), events.begin(), events.end());
  bounds.push_back(spec.horizon);
  for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
    const double start = sys.sampler.eval(bounds[seg]).sum();
    for (int i = 1; i <= 8; ++i) {
      const double t = bounds[seg] + (bounds[seg + 1] - bounds[seg]) * i / 8.0;
      conservation = std::max(conservation, std::abs(sys.sampler.eval(t).sum() - start));
    }
  }

  DynamicsParams p;
  p.kind = DynamicsKind::gene;
  p.b = Vector::LinSpaced(3, 0.5, 1.5);
  p.f_exp = 1.0;
  const Vector g0 = Vector::Constant(3, 1.7);
  const StateSampler gene = simulate_gene(TopologySchedule::constant(Topology::empty(3)), g0, p, 2.0, 1e-10);
  double decay = 0.0;
  for (double t : {0.5, 1.0, 2.0})
    for (int i = 0; i < 3; ++i)
      decay = std::max(decay, std::abs(gene.eval(t)(i) / (1.7 * std::exp(-p.b(i) * t)) - 1.0));

  Outcome out;
  out.pass = expm_err <= 1e-5 && conservation <= 1e-8 && decay <= 1e-6;
  out.detail = "heat vs expm " + fmt(expm_err) + ", heat sum drift " + fmt(conservation) + " over " +
               std::to_string(bounds.size() - 1) + " segments, gene decay relative error " + fmt(decay);
  return out;
}

// 5. Least-squares fit of the fusion weight (and the layer weight) of the
// approximate field to the direct field on random (Z, A, dA) triples.
struct Triple {
  SparsePtr a_norm;
  SparsePtr d_adj;
  Matrix z;
};

Outcome approximation() {
  const int n = 10, d = 4;
  Rng rng(2024);
  auto random_triple = [&]() {
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.bernoulli(0.3)) a(i, j) = a(j, i) = 1.0;
    Matrix da = Matrix::Zero(n, n);
    for (int e = 0; e < 2; ++e) {
      const int i = static_cast<int>(rng.below(n));
      int j = static_cast<int>(rng.below(n - 1));
      if (j >= i) ++j;
      da(i, j) = da(j, i) = rng.normal();
    }
    Triple t;
    t.a_norm = std::make_shared<const SparseMatrix>(normalize_adjacency(a).sparseView());
    t.d_adj = std::make_shared<const SparseMatrix>(da.sparseView());
    t.z = uniform_matrix(rng, n, d, -1.0, 1.0);
    return t;
  };
  std::vector<Triple> train(200), test(50);
  for (auto& t : train) t = random_triple();
  for (auto& t : test) t = random_triple();

  ModelSpec direct_spec;
  direct_spec.variant = Variant::gncde_direct;
  direct_spec.n_nodes = n;
  direct_spec.embed_dim = d;
  const VectorFieldParams direct = init_params(direct_spec, 17);
  ModelSpec approx_spec = direct_spec;
  approx_spec.variant = Variant::gncde_approx;
  VectorFieldParams approx = init_params(approx_spec, 17);
  approx.weights.layers = direct.weights.layers;

  auto target = [&](const Triple& t) {
    return field_direct(direct_spec, direct.weights, t.a_norm, 1.0, *t.d_adj, Matrix(), t.z);
  };
  auto relative_error = [&](const std::vector<Triple>& set) {
    double num = 0.0, den = 0.0;
    for (const auto& t : set) {
      const Matrix y = target(t);
      num += (field_approx(approx_spec, approx.weights, t.a_norm, t.d_adj, Matrix(), t.z) - y).squaredNorm();
      den += y.squaredNorm();
    }
    return std::sqrt(num / den);
  };
  const double baseline = relative_error(test);

  // The approximate output is relu(X W^DR Z W) with X = [A_norm | dA], so it
  // is nonnegative; the negative part of the direct field bounds any fit.
  double neg = 0.0, total = 0.0;
  for (const auto& t : test) {
    const Matrix y = target(t);
    neg += y.cwiseMin(0.0).squaredNorm();
    total += y.squaredNorm();
  }
  const double lower_bound = std::sqrt(neg / total);

  Vector targets(static_cast<Eigen::Index>(train.size()) * n * d);
  for (std::size_t k = 0; k < train.size(); ++k)
    targets.segment(static_cast<Eigen::Index>(k) * n * d, n * d) = target(train[k]).reshaped();

  // Levenberg-Marquardt on relu(K w) ~ targets for a fixed design K.
  auto fit = [&](const Matrix& design, Vector w) {
    double lambda = 1e-3;
    auto cost = [&](const Vector& v) { return ((design * v).cwiseMax(0.0) - targets).squaredNorm(); };
    double current = cost(w);
    for (int it = 0; it < 30; ++it) {
      const Vector pre = design * w;
      const Vector r = pre.cwiseMax(0.0) - targets;
      const Matrix j = (pre.array() > 0.0).cast<double>().matrix().asDiagonal() * design;
      Matrix normal = j.transpose() * j;
      normal.diagonal().array() += lambda;
      const Vector candidate = w - normal.ldlt().solve(j.transpose() * r);
      const double c = cost(candidate);
      if (c < current) {
        w = candidate;
        current = c;
        lambda *= 0.3;
      } else {
        lambda *= 10.0;
      }
    }
    return w;
  };

  auto fused = [&](const Triple& t) {
    Matrix x(n, 2 * n);
    x << Matrix(*t.a_norm), Matrix(*t.d_adj);
    return x;
  };
  const Eigen::Index rows = static_cast<Eigen::Index>(train.size()) * n * d;
  for (int round = 0; round < 8; ++round) {
    Matrix k_fusion(rows, 2 * n * n);
    for (std::size_t k = 0; k < train.size(); ++k) {
      const Matrix y = train[k].z * approx.weights.layers[0];
      k_fusion.middleRows(static_cast<Eigen::Index>(k) * n * d, n * d) =
          Eigen::kroneckerProduct(y.transpose(), fused(train[k]));
    }
    const Vector wf = fit(k_fusion, approx.weights.fusion.reshaped());
    approx.weights.fusion = wf.reshaped(2 * n, n);

    Matrix k_layer(rows, d * d);
    for (std::size_t k = 0; k < train.size(); ++k) {
      const Matrix pz = fused(train[k]) * approx.weights.fusion * train[k].z;
      k_layer.middleRows(static_cast<Eigen::Index>(k) * n * d, n * d) =
          Eigen::kroneckerProduct(Matrix::Identity(d, d), pz);
    }
    const Vector wl = fit(k_layer, approx.weights.layers[0].reshaped());
    approx.weights.layers[0] = wl.reshaped(d, d);
  }
  const double fitted_train = relative_error(train);
  const double fitted = relative_error(test);

  Outcome out;
  out.pass = fitted < 0.1;
  out.detail = "held-out relative error " + fmt(fitted) + " (train " + fmt(fitted_train) + ", unfitted " +
               fmt(baseline) + ", nonnegativity floor " + fmt(lower_bound) + ", limit 0.1)";
  return out;
}

// 6. Ordering of the graph model against the two baselines.
Outcome ordering() {
  struct Row {
    DynamicsKind dynamics;
    TopologyKind topology;
  };
  Outcome out{true, ""};
  for (const Row row : {Row{DynamicsKind::heat, TopologyKind::grid}, Row{DynamicsKind::gene, TopologyKind::small_world}}) {
    std::vector<double> sums;
    for (Variant v : {Variant::gncde_approx, Variant::gnode, Variant::neural_cde_plain}) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        DatasetSpec ds;
        ds.dynamics = row.dynamics;
        ds.topology = row.topology;
        ds.n_nodes = 100;
        ds.snapshots = 60;
        ds.seed = seed;
        const Dataset data = generate_dataset(ds);
        TaskConfig cfg;
        cfg.variant = v;
        cfg.solver.step = 0.05;
        cfg.solver.extrapolation = ExtrapolationMode::hold;
        cfg.train.iterations = 500;
        cfg.train.eval_every = 500;
        cfg.split = cli::proportional_split(60);
        cfg.seed = seed;
        const TaskResult r = run_node_attribute_task(data.observations, cfg);
        total += r.failed ? std::numeric_limits<double>::infinity() : r.metrics.at("sum_l1");
      }
      sums.push_back(total / 3.0);
    }
    const bool ok = sums[0] < sums[1] && sums[0] < sums[2];
    out.pass = out.pass && ok;
    out.detail += to_string(row.dynamics) + "/" + to_string(row.topology) + ": approx " + fmt(sums[0]) + ", gnode " +
                  fmt(sums[1]) + ", plain " + fmt(sums[2]) + "; ";
  }
  out.detail += "mean sum_l1 over 3 seeds";
  return out;
}

// 7. Training with hidden adjacency channels.
Outcome missing_channels() {
  DatasetSpec ds;
  ds.topology = TopologyKind::grid;
  ds.n_nodes = 20;
  ds.snapshots = 30;
  const Dataset data = generate_dataset(ds);
  auto run = [&](double mask) {
    TaskConfig cfg;
    cfg.variant = Variant::gncde_approx;
    cfg.solver.step = 0.05;
    cfg.train.iterations = 300;
    cfg.train.eval_every = 100;
    cfg.split = SplitSpec{20, 5, 5};
    cfg.mask_fraction = mask;
    return run_node_attribute_task(data.observations, cfg);
  };
  const TaskResult full = run(0.0);
  const TaskResult masked = run(0.3);
  bool finite = !masked.failed;
  for (const auto& [name, value] : masked.metrics) finite = finite && std::isfinite(value);
  const double a = full.metrics.at("sum_l1"), b = masked.metrics.at("sum_l1");
  Outcome out;
  out.pass = finite && !full.failed && b <= 2.0 * a;
  out.detail = "sum_l1 masked " + fmt(b) + " vs unmasked " + fmt(a) + " (limit 2x), metrics " +
               (finite ? "finite" : "not finite");
  return out;
}

// 8. Byte-identical outputs of generate and train.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "gncde_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config = (dir / "smoke.ini").string();
  cli::write_text(config,
                  "[dataset]\ntopology = small_world\nn_nodes = 20\nsnapshots = 20\nseed = 4\n"
                  "[solver]\nstep = 0.05\n[train]\niterations = 40\neval_every = 10\n"
                  "[split]\ntrain = 14\ninterp = 3\nextrap = 3\n");
  std::ostringstream sink;
  bool ok = true;
  ok = ok && cli::cmd_generate({config, (dir / "a.json").string(), std::nullopt}, sink) == cli::kOk;
  ok = ok && cli::cmd_generate({config, (dir / "b.json").string(), std::nullopt}, sink) == cli::kOk;
  ok = ok && cli::read_text((dir / "a.json").string()) == cli::read_text((dir / "b.json").string());
  const std::string data = (dir / "a.json").string();
  ok = ok && cli::cmd_train({config, data, (dir / "run1").string(), std::nullopt}, sink) == cli::kOk;
  ok = ok && cli::cmd_train({config, data, (dir / "run2").string(), std::nullopt}, sink) == cli::kOk;
  std::size_t compared = 1;
  for (const char* f : {"report.json", "curves.csv", "checkpoint.json"}) {
    ok = ok && cli::read_text((dir / "run1" / f).string()) == cli::read_text((dir / "run2" / f).string());
    ++compared;
  }
  fs::remove_all(dir);
  return {ok, std::to_string(compared) + " output files compared byte for byte"};
}

// 9. A full field with zero structural weight against the linear variant.
Outcome full_reproduces_linear() {
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset d = churned_dataset(5, 6, 100 + trial);
    const ModelSpec lin_spec = attribute_model_spec(Variant::gncde_linear, 5, 3, 1, 1);
    ModelSpec full_spec = attribute_model_spec(Variant::gncde_full, 5, 3, 1, 1);
    full_spec.structural_scale = 0.0;
    VectorFieldParams lin = init_params(lin_spec, 200 + trial);
    Rng rng(300 + trial);
    lin.weights.mixing = uniform_matrix(rng, 5, 5, -1.0, 1.0);
    VectorFieldParams full = init_params(full_spec, 400 + trial);
    full.weights = lin.weights;
    SolverConfig solver;
    solver.step = 0.05;
    const ForwardModel lm = attribute_forward_model(lin_spec, solver, d.observations, Scheme::natural_cubic);
    const ForwardModel fm = attribute_forward_model(full_spec, solver, d.observations, Scheme::natural_cubic);
    const std::vector<double> times = d.observations.times();
    const auto a = lm.embeddings(lin.weights, times);
    const auto b = fm.embeddings(full.weights, times);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, max_abs(a[k] - b[k]));
  }
  return {worst <= 1e-12, "max trajectory difference " + fmt(worst) + " over 10 instances (limit 1e-12)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::vector<int> expect_fail;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail; they do not affect the exit code")
      ->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {"gradient check, all variants", gradients},
      {"solver convergence orders", solver_orders},
      {"interpolation contracts", interpolation},
      {"dynamics oracles", dynamics},
      {"fused field approximates direct field", approximation},
      {"graph model beats baselines (n=100)", ordering},
      {"robustness to masked channels", missing_channels},
      {"determinism of generate and train", determinism},
      {"full field without structure equals linear", full_reproduces_linear},
  };
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> tolerated(expect_fail.begin(), expect_fail.end());
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && selected.count(id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool known = !o.pass && tolerated.count(id) > 0;
    if (!o.pass && !known) ++unexpected;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << (known ? " (expected)" : "") << "  "
              << criteria[i].name << "  " << o.detail << "  [" << fmt(secs) << " s]" << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
