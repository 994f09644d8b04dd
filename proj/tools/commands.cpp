#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "gncde/train.hpp"

namespace gncde::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void ensure_directory(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& field, const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParameterError(field + ": expected a number, got '" + s + "'");
  return v;
}

/// The config's split refers to its own snapshot count; a loaded dataset may
/// differ, in which case the proportional split is recomputed for it.
TaskConfig task_for(const ExperimentConfig& c, std::size_t snapshots) {
  TaskConfig t = c.task;
  if (!c.split_given && static_cast<int>(snapshots) != c.dataset.snapshots)
    t.split = proportional_split(static_cast<int>(snapshots));
  return t;
}

void print_dataset_summary(const Dataset& d, std::ostream& log) {
  const auto& obs = d.observations;
  std::size_t min_edges = std::numeric_limits<std::size_t>::max(), max_edges = 0;
  for (const auto& s : obs.snapshots) {
    min_edges = std::min(min_edges, s.topology.edge_count());
    max_edges = std::max(max_edges, s.topology.edge_count());
  }
  log << "nodes: " << obs.n_nodes() << "\n"
      << "snapshots: " << obs.size() << " over [" << fmt(obs.snapshots.front().time) << ", "
      << fmt(obs.snapshots.back().time) << "]\n"
      << "edges: first " << obs.snapshots.front().topology.edge_count() << ", last "
      << obs.snapshots.back().topology.edge_count() << ", min " << min_edges << ", max " << max_edges << "\n";
  if (obs.node_states) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Matrix& x : *obs.node_states) {
      lo = std::min(lo, x.minCoeff());
      hi = std::max(hi, x.maxCoeff());
    }
    log << "states: [" << fmt(lo) << ", " << fmt(hi) << "]\n";
  }
}

Checkpoint checkpoint_of(const TaskResult& r, const TaskConfig& t) {
  Checkpoint c;
  c.task = to_string(r.task);
  c.spec = r.spec;
  c.weights = r.report.final_params.weights;
  c.scheme = t.scheme;
  c.solver = t.solver;
  c.train_indices = r.split.train;
  c.seed = t.seed;
  return c;
}

std::string per_run_header() { return "config," + results_csv_header(); }

struct RunJob {
  std::size_t config_index = 0;
  std::uint64_t seed = 0;
};

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  ensure_directory(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const GenerateOptions& opt, std::ostream& log) {
  ExperimentConfig c = load_config(opt.config);
  if (opt.seed) c.dataset.seed = *opt.seed;
  if (opt.out.empty()) throw ParameterError("generate: --out is required");
  const Dataset d = generate_dataset(c.dataset);
  save_dataset(opt.out, d);
  print_dataset_summary(d, log);
  log << "wrote " << opt.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainOptions& opt, std::ostream& log) {
  ExperimentConfig c = load_config(opt.config);
  const Dataset d = opt.dataset.empty() ? generate_dataset(c.dataset) : load_dataset(opt.dataset);
  if (d.observations.n_nodes() != c.dataset.n_nodes)
    throw ParameterError("train: dataset has " + std::to_string(d.observations.n_nodes()) +
                         " nodes but [dataset] n_nodes is " + std::to_string(c.dataset.n_nodes));
  TaskConfig t = task_for(c, d.observations.size());
  t.seed = opt.seed ? *opt.seed : c.seeds.front();
  const std::string out = opt.out.empty() ? c.output_dir : opt.out;
  ensure_directory(out);

  const TaskResult r = run_task(d.observations, t);
  write_text((fs::path(out) / "report.json").string(), r.to_json());
  write_text((fs::path(out) / "curves.csv").string(), r.report.curves_csv());
  save_checkpoint((fs::path(out) / "checkpoint.json").string(), checkpoint_of(r, t));

  for (const auto& [k, v] : r.metrics) log << k << ": " << fmt(v) << "\n";
  log << "iterations: " << r.report.iterations_completed << "/" << r.report.iterations_requested << "\n";
  if (r.failed) {
    log << "training diverged: " << r.message << "\n";
    return kNumericalError;
  }
  log << "wrote " << out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// grid

std::vector<std::string> expand_config_paths(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".ini") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw IoError("config path '" + p + "' does not exist");
    }
  }
  if (out.empty()) throw ParameterError("grid: no .ini configs found");
  return out;
}

std::vector<CsvRow> read_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return {};
  std::vector<std::string> header;
  {
    std::stringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CsvRow row;
    std::size_t start = 0;
    for (std::size_t col = 0; col < header.size(); ++col) {
      const std::size_t end = line.find(',', start);
      row[header[col]] = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      start = end == std::string::npos ? line.size() : end + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string aggregate_results(const std::vector<CsvRow>& runs) {
  static const char* kMetrics[] = {"interp_l1", "extrap_l1", "sum_l1", "accuracy", "auc"};
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CsvRow*>> groups;
  for (const auto& r : runs) {
    const std::string& key = r.at("config");
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::ostringstream out;
  out << "config,task,dynamics,topology,variant,scheme,runs,failed";
  for (const char* m : kMetrics) out << ',' << m << "_mean," << m << "_std";
  out << '\n';
  for (const auto& key : order) {
    const auto& g = groups[key];
    const CsvRow& first = *g.front();
    int failed = 0;
    for (const CsvRow* r : g) failed += r->at("status") == "ok" ? 0 : 1;
    out << key << ',' << first.at("task") << ',' << first.at("dynamics") << ',' << first.at("topology") << ','
        << first.at("variant") << ',' << first.at("scheme") << ',' << g.size() << ',' << failed;
    for (const char* m : kMetrics) {
      std::vector<double> v;
      for (const CsvRow* r : g)
        if (r->at("status") == "ok" && !r->at(m).empty()) v.push_back(to_double(m, r->at(m)));
      if (v.empty()) {
        out << ",,";
        continue;
      }
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      out << ',' << fmt(mean) << ',' << fmt(std::sqrt(var));
    }
    out << '\n';
  }
  return out.str();
}

int cmd_grid(const GridOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw ParameterError("grid: --out is required");
  if (opt.jobs < 1) throw ParameterError("grid: --jobs must be at least 1");
  const std::vector<std::string> paths = expand_config_paths(opt.configs);
  std::vector<ExperimentConfig> configs;
  std::set<std::string> names;
  for (const auto& p : paths) {
    configs.push_back(load_config(p));
    if (opt.seed) configs.back().seeds = {*opt.seed};
    if (!names.insert(configs.back().name).second)
      throw ParameterError("grid: two configs share the name '" + configs.back().name + "'");
  }

  const fs::path out_csv(opt.out);
  const fs::path run_root = out_csv.parent_path() / (out_csv.stem().string() + "_runs");
  std::vector<RunJob> jobs;
  for (std::size_t i = 0; i < configs.size(); ++i)
    for (std::uint64_t s : configs[i].seeds) jobs.push_back({i, s});

  std::vector<Dataset> datasets;
  for (const auto& c : configs) datasets.push_back(generate_dataset(c.dataset));

  std::vector<std::string> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const ExperimentConfig& c = configs[jobs[j].config_index];
      const Dataset& d = datasets[jobs[j].config_index];
      TaskConfig t = task_for(c, d.observations.size());
      t.seed = jobs[j].seed;
      const fs::path dir = run_root / c.name / ("seed" + std::to_string(t.seed));
      const auto start = std::chrono::steady_clock::now();
      TaskResult r;
      try {
        r = run_task(d.observations, t);
        ensure_directory(dir);
        write_text((dir / "report.json").string(), r.to_json());
        write_text((dir / "curves.csv").string(), r.report.curves_csv());
      } catch (const std::exception& e) {
        r = TaskResult();
        r.task = t.task;
        r.failed = true;
        r.message = e.what();
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows[j] = c.name + "," +
                results_csv_row(r, to_string(c.dataset.dynamics), to_string(c.dataset.topology),
                                to_string(t.variant), to_string(t.scheme), t.seed, secs);
      std::lock_guard<std::mutex> lock(log_mutex);
      log << c.name << " seed " << t.seed << ": " << (r.failed ? "failed (" + r.message + ")" : "ok");
      if (auto it = r.metrics.find("sum_l1"); it != r.metrics.end()) log << " sum_l1=" << fmt(it->second);
      log << "\n";
    }
  };
  const int threads = std::min<int>(opt.jobs, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::string per_run = per_run_header();
  for (const auto& r : rows) per_run += r;
  const fs::path runs_csv = out_csv.parent_path() / (out_csv.stem().string() + "_runs.csv");
  write_text(runs_csv.string(), per_run);
  write_text(out_csv.string(), aggregate_results(read_csv(per_run)));
  log << "wrote " << out_csv.string() << " and " << runs_csv.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// surface

int cmd_surface(const SurfaceOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw ParameterError("surface: --out is required");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const Dataset d = load_dataset(opt.dataset);
  const auto& obs = d.observations;
  if (ck.task != "attributes") throw ParameterError("surface: checkpoint task '" + ck.task + "' has no attribute head");
  if (ck.spec.n_nodes != obs.n_nodes())
    throw ParameterError("surface: checkpoint expects " + std::to_string(ck.spec.n_nodes) + " nodes, dataset has " +
                         std::to_string(obs.n_nodes()));
  if (!obs.node_states) throw ParameterError("surface: dataset carries no node states");
  if (ck.spec.out_dim != obs.node_states->front().cols())
    throw ParameterError("surface: checkpoint decodes " + std::to_string(ck.spec.out_dim) +
                         " attributes, dataset has " + std::to_string(obs.node_states->front().cols()));
  for (std::size_t k : ck.train_indices)
    if (k >= obs.size()) throw ParameterError("surface: checkpoint training index outside the dataset");

  const DynamicGraphObservations train = obs.select(ck.train_indices);
  const ForwardModel model = attribute_forward_model(ck.spec, ck.solver, train, ck.scheme);

  std::vector<double> times;
  if (opt.times == "knots") {
    times = obs.times();
  } else if (opt.times.rfind("uniform:", 0) == 0) {
    const int count = static_cast<int>(to_double("--times", opt.times.substr(8)));
    if (count < 2) throw ParameterError("--times: uniform needs at least two points");
    const double a = train.times().front(), b = obs.times().back();
    for (int i = 0; i < count; ++i) times.push_back(a + (b - a) * i / (count - 1));
  } else {
    for (const auto& s : split_list(opt.times)) times.push_back(to_double("--times", s));
  }
  if (times.empty()) throw ParameterError("--times: no times given");

  std::vector<int> nodes;
  if (opt.nodes == "all") {
    for (int i = 0; i < obs.n_nodes(); ++i) nodes.push_back(i);
  } else {
    for (const auto& s : split_list(opt.nodes)) {
      const double v = to_double("--nodes", s);
      if (v != std::floor(v) || v < 0 || v >= obs.n_nodes())
        throw ParameterError("--nodes: '" + s + "' is not a node index");
      nodes.push_back(static_cast<int>(v));
    }
  }

  const std::vector<Matrix> pred = model.predict(ck.weights, times);
  std::optional<GeneratedSystem> system;
  const std::vector<double> knot_times = obs.times();
  std::ostringstream out;
  out << "time,node,true_value,predicted_value\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    Matrix truth;
    const auto it = std::find(knot_times.begin(), knot_times.end(), t);
    if (it != knot_times.end()) {
      truth = (*obs.node_states)[static_cast<std::size_t>(it - knot_times.begin())];
    } else {
      if (t > d.spec.horizon) throw RangeError("surface: time " + fmt(t) + " lies past the simulated horizon");
      if (!system) system = generate_system(d.spec);
      truth = system->sampler.eval(t);
    }
    for (int i : nodes) out << fmt(t) << ',' << i << ',' << fmt(truth(i, 0)) << ',' << fmt(pred[k](i, 0)) << '\n';
  }
  write_text(opt.out, out.str());
  log << "wrote " << times.size() * nodes.size() << " rows to " << opt.out << "\n";
  return kOk;
}

}  // namespace gncde::cli
