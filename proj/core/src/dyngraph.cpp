#include "gncde/dyngraph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gncde {

namespace {

void add_edge(Matrix& a, int i, int j) {
  a(i, j) = 1.0;
  a(j, i) = 1.0;
}

Topology grid_topology(int n) {
  int rows = 1;
  for (int r = 1; r * r <= n; ++r)
    if (n % r == 0) rows = r;
  const int cols = n / rows;
  Matrix a = Matrix::Zero(n, n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) add_edge(a, v, v + 1);
      if (r + 1 < rows) add_edge(a, v, v + cols);
    }
  }
  return Topology(std::move(a));
}

Topology random_topology(int n, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("random topology: edge_prob must be in (0,1]");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) add_edge(a, i, j);
  return Topology(std::move(a));
}

Topology power_law_topology(int n, int m, Rng& rng) {
  if (m < 1 || m >= n) throw ParameterError("power_law topology: attach must be in [1, n)");
  Matrix a = Matrix::Zero(n, n);
  std::vector<int> endpoints;
  for (int i = 0; i <= m; ++i) {
    for (int j = i + 1; j <= m; ++j) {
      add_edge(a, i, j);
      endpoints.push_back(i);
      endpoints.push_back(j);
    }
  }
  for (int v = m + 1; v < n; ++v) {
    std::vector<int> targets;
    while (static_cast<int>(targets.size()) < m) {
      const int u = endpoints[rng.below(endpoints.size())];
      if (std::find(targets.begin(), targets.end(), u) == targets.end()) targets.push_back(u);
    }
    for (int u : targets) {
      add_edge(a, v, u);
      endpoints.push_back(v);
      endpoints.push_back(u);
    }
  }
  return Topology(std::move(a));
}

Topology small_world_topology(int n, int k, double p, Rng& rng) {
  if (k < 2 || k % 2 != 0 || k >= n)
    throw ParameterError("small_world topology: ring_neighbors must be even and in [2, n)");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("small_world topology: rewire_prob must be in [0,1]");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 1; j <= k / 2; ++j) add_edge(a, i, (i + j) % n);
  for (int j = 1; j <= k / 2; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v = (i + j) % n;
      if (a(i, v) == 0.0 || !rng.bernoulli(p)) continue;
      if (a.row(i).sum() >= n - 1) continue;
      int w;
      do {
        w = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      } while (w == i || a(i, w) != 0.0);
      a(i, v) = a(v, i) = 0.0;
      add_edge(a, i, w);
    }
  }
  return Topology(std::move(a));
}

Topology community_topology(int n, int blocks, double p_in, double p_out, Rng& rng) {
  if (blocks < 1 || n % blocks != 0)
    throw ParameterError("community topology: communities must divide n");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0))
    throw ParameterError("community topology: p_in and p_out must be in [0,1]");
  const int size = n / blocks;
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(i / size == j / size ? p_in : p_out)) add_edge(a, i, j);
  return Topology(std::move(a));
}

}  // namespace

std::size_t Topology::edge_count() const {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    for (Eigen::Index j = i + 1; j < adjacency.cols(); ++j)
      if (adjacency(i, j) != 0.0) ++count;
  return count;
}

void Topology::validate() const {
  if (adjacency.rows() != adjacency.cols() || adjacency.rows() < 1)
    throw ParameterError("topology: adjacency must be square and non-empty");
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    if (adjacency(i, i) != 0.0) throw ParameterError("topology: diagonal must be zero");
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
      const double v = adjacency(i, j);
      if (v != 0.0 && v != 1.0) throw ParameterError("topology: entries must be 0 or 1");
      if (v != adjacency(j, i)) throw ParameterError("topology: adjacency must be symmetric");
    }
  }
}

std::vector<double> DynamicGraphObservations::times() const {
  std::vector<double> t;
  t.reserve(snapshots.size());
  for (const auto& s : snapshots) t.push_back(s.time);
  return t;
}

void DynamicGraphObservations::validate() const {
  if (snapshots.empty()) throw ParameterError("observations: no snapshots");
  const int n = n_nodes();
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    if (!std::isfinite(snapshots[k].time)) throw ParameterError("observations: non-finite time");
    if (snapshots[k].topology.n_nodes() != n)
      throw ParameterError("observations: snapshots must share the node set");
    if (k > 0 && !(snapshots[k].time > snapshots[k - 1].time))
      throw ParameterError("observations: times must be strictly increasing");
  }
  if (node_states) {
    if (node_states->size() != snapshots.size())
      throw ParameterError("observations: node_states must align with snapshots");
    for (const auto& s : *node_states)
      if (s.rows() != n || s.cols() != node_states->front().cols())
        throw ParameterError("observations: node_states shape mismatch");
  }
  if (!missing.empty()) {
    if (missing.size() != snapshots.size())
      throw ParameterError("observations: mask must align with snapshots");
    for (const auto& m : missing)
      if (m.size() != static_cast<std::size_t>(n) * n)
        throw ParameterError("observations: mask must have n*n channels per snapshot");
  }
}

DynamicGraphObservations DynamicGraphObservations::select(
    const std::vector<std::size_t>& indices) const {
  DynamicGraphObservations out;
  if (node_states) out.node_states.emplace();
  for (std::size_t i : indices) {
    if (i >= snapshots.size()) throw RangeError("observations: snapshot index out of range");
    out.snapshots.push_back(snapshots[i]);
    if (node_states) out.node_states->push_back((*node_states)[i]);
    if (!missing.empty()) out.missing.push_back(missing[i]);
  }
  return out;
}

TopologyKind parse_topology_kind(const std::string& s) {
  if (s == "grid") return TopologyKind::grid;
  if (s == "random") return TopologyKind::random;
  if (s == "power_law") return TopologyKind::power_law;
  if (s == "small_world") return TopologyKind::small_world;
  if (s == "community") return TopologyKind::community;
  throw ParameterError("unknown topology kind '" + s + "'");
}

std::string to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::grid: return "grid";
    case TopologyKind::random: return "random";
    case TopologyKind::power_law: return "power_law";
    case TopologyKind::small_world: return "small_world";
    case TopologyKind::community: return "community";
  }
  return "?";
}

DynamicsKind parse_dynamics_kind(const std::string& s) {
  if (s == "heat") return DynamicsKind::heat;
  if (s == "gene") return DynamicsKind::gene;
  throw ParameterError("unknown dynamics kind '" + s + "'");
}

std::string to_string(DynamicsKind k) { return k == DynamicsKind::heat ? "heat" : "gene"; }

Topology gen_topology(TopologyKind kind, int n, const TopologyParams& params, std::uint64_t seed) {
  if (n < 2) throw ParameterError("gen_topology: n must be at least 2");
  Rng rng(seed);
  switch (kind) {
    case TopologyKind::grid: return grid_topology(n);
    case TopologyKind::random: return random_topology(n, params.edge_prob, rng);
    case TopologyKind::power_law: return power_law_topology(n, params.attach, rng);
    case TopologyKind::small_world:
      return small_world_topology(n, params.ring_neighbors, params.rewire_prob, rng);
    case TopologyKind::community:
      return community_topology(n, params.communities, params.p_in, params.p_out, rng);
  }
  throw ParameterError("gen_topology: unknown kind");
}

TopologySchedule::TopologySchedule(std::vector<double> event_times, std::vector<Topology> segments)
    : events_(std::move(event_times)), segments_(std::move(segments)) {
  if (segments_.size() != events_.size() + 1)
    throw ParameterError("TopologySchedule: need one more segment than events");
  for (std::size_t i = 1; i < events_.size(); ++i)
    if (!(events_[i] >= events_[i - 1])) throw ParameterError("TopologySchedule: events must be sorted");
}

std::size_t TopologySchedule::segment_index(double t) const {
  return static_cast<std::size_t>(std::upper_bound(events_.begin(), events_.end(), t) - events_.begin());
}

TopologySchedule evolve_topology(const Topology& base, const ChurnSpec& churn, std::uint64_t seed) {
  base.validate();
  if (!(churn.drop_prob >= 0.0 && churn.drop_prob <= 1.0) ||
      !(churn.add_prob >= 0.0 && churn.add_prob <= 1.0))
    throw ParameterError("evolve_topology: probabilities must be in [0,1]");
  if (!std::is_sorted(churn.event_times.begin(), churn.event_times.end()))
    throw ParameterError("evolve_topology: event_times must be sorted");
  Rng rng(seed);
  const int n = base.n_nodes();
  std::vector<Topology> segments{base};
  for (std::size_t e = 0; e < churn.event_times.size(); ++e) {
    Matrix a = segments.back().adjacency;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double u = rng.uniform();
        if (a(i, j) != 0.0) {
          if (u < churn.drop_prob) a(i, j) = a(j, i) = 0.0;
        } else if (u < churn.add_prob) {
          a(i, j) = a(j, i) = 1.0;
        }
      }
    }
    segments.emplace_back(std::move(a));
  }
  return TopologySchedule(churn.event_times, std::move(segments));
}

void DynamicsParams::validate(int n) const {
  if (kind == DynamicsKind::heat) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("heat dynamics: k must be positive");
    return;
  }
  if (b.size() != n) throw ParameterError("gene dynamics: b must have one entry per node");
  if ((b.array() <= 0.0).any()) throw ParameterError("gene dynamics: b must be positive");
  if (!(h_exp >= 1.0)) throw ParameterError("gene dynamics: h_exp must be >= 1");
  if (!(f_exp > 0.0)) throw ParameterError("gene dynamics: f_exp must be positive");
}

Vector StateSampler::rhs(const Segment& seg, const Vector& x) const {
  if (params_.kind == DynamicsKind::heat) {
    return -params_.k * (seg.degree.cwiseProduct(x) - seg.adjacency * x);
  }
  Vector hill(x.size());
  Vector decay(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = std::max(x(i), 0.0);
    const double xh = params_.h_exp == 2.0 ? xi * xi : std::pow(xi, params_.h_exp);
    hill(i) = xh / (xh + 1.0);
    decay(i) = params_.f_exp == 1.0 ? xi : std::pow(xi, params_.f_exp);
  }
  return -params_.b.cwiseProduct(decay) + seg.adjacency * hill;
}

Vector StateSampler::rk4_step(const Segment& seg, const Vector& x, double h) const {
  const Vector k1 = rhs(seg, x);
  const Vector k2 = rhs(seg, x + 0.5 * h * k1);
  const Vector k3 = rhs(seg, x + 0.5 * h * k2);
  const Vector k4 = rhs(seg, x + h * k3);
  Vector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (params_.kind == DynamicsKind::gene) next = next.cwiseMax(0.0);
  return next;
}

std::size_t StateSampler::grid_steps() const {
  std::size_t total = 0;
  for (const auto& s : segments_) total += s.grid.size() - 1;
  return total;
}

Vector StateSampler::eval(double t) const {
  if (!(t >= 0.0 && t <= horizon_)) {
    std::ostringstream os;
    os << "StateSampler: time " << t << " outside [0, " << horizon_ << "]";
    throw RangeError(os.str());
  }
  if (segments_.empty()) return x0_;
  std::size_t s = 0;
  while (s + 1 < segments_.size() && t >= segments_[s + 1].start) ++s;
  const Segment& seg = segments_[s];
  if (t >= seg.end) return seg.grid.back();
  const std::size_t m = seg.grid.size() - 1;
  std::size_t i = static_cast<std::size_t>(std::floor((t - seg.start) / seg.step));
  if (i >= m) i = m - 1;
  const double tau = t - (seg.start + static_cast<double>(i) * seg.step);
  if (tau == 0.0) return seg.grid[i];
  return rk4_step(seg, seg.grid[i], tau);
}

StateSampler simulate(const TopologySchedule& schedule, const Vector& x0,
                      const DynamicsParams& params, double horizon, double rtol) {
  const int n = schedule.n_nodes();
  if (x0.size() != n) throw ParameterError("simulate: x0 must have one entry per node");
  if (!x0.allFinite()) throw ParameterError("simulate: x0 must be finite");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("simulate: horizon must be positive");
  if (!(rtol > 0.0)) throw ParameterError("simulate: rtol must be positive");
  params.validate(n);
  if (params.kind == DynamicsKind::gene && (x0.array() < 0.0).any())
    throw ParameterError("simulate: gene dynamics require x0 >= 0");

  StateSampler out;
  out.params_ = params;
  out.x0_ = x0;
  out.horizon_ = horizon;

  std::vector<double> bounds{0.0};
  for (double e : schedule.event_times())
    if (e > 0.0 && e < horizon && e > bounds.back()) bounds.push_back(e);
  bounds.push_back(horizon);

  constexpr double kInitialStep = 0.01;
  constexpr int kMaxDoublings = 20;
  Vector x = x0;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    StateSampler::Segment seg;
    seg.start = bounds[s];
    seg.end = bounds[s + 1];
    seg.adjacency = schedule.at(seg.start).sparse();
    seg.degree = schedule.at(seg.start).degrees();
    const double len = seg.end - seg.start;

    auto run = [&](std::size_t m, std::vector<Vector>* grid) {
      const double h = len / static_cast<double>(m);
      Vector y = x;
      if (grid) grid->assign(1, y);
      for (std::size_t i = 0; i < m; ++i) {
        y = out.rk4_step(seg, y, h);
        if (grid) grid->push_back(y);
      }
      return y;
    };

    std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / kInitialStep)));
    Vector coarse = run(m, nullptr);
    bool converged = false;
    double diff = std::numeric_limits<double>::infinity();
    for (int d = 0; d < kMaxDoublings; ++d) {
      std::vector<Vector> grid;
      Vector fine = run(2 * m, &grid);
      diff = (fine - coarse).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
      if (fine.allFinite() && coarse.allFinite() && diff < rtol * scale) {
        seg.step = len / static_cast<double>(2 * m);
        seg.grid = std::move(grid);
        converged = true;
        break;
      }
      coarse = std::move(fine);
      m *= 2;
    }
    if (!converged) {
      std::ostringstream os;
      os << "simulate: step refinement did not converge on segment [" << seg.start << ", "
         << seg.end << "] after " << m << " steps (last difference " << diff << ", rtol " << rtol
         << ")";
      throw NumericalError(os.str());
    }
    x = seg.grid.back();
    out.segments_.push_back(std::move(seg));
  }
  return out;
}

StateSampler simulate_heat(const TopologySchedule& schedule, const Vector& x0, double k,
                           double horizon, double rtol) {
  DynamicsParams p;
  p.kind = DynamicsKind::heat;
  p.k = k;
  return simulate(schedule, x0, p, horizon, rtol);
}

StateSampler simulate_gene(const TopologySchedule& schedule, const Vector& x0,
                           const DynamicsParams& params, double horizon, double rtol) {
  DynamicsParams p = params;
  p.kind = DynamicsKind::gene;
  return simulate(schedule, x0, p, horizon, rtol);
}

DynamicGraphObservations sample_observations(const TopologySchedule& schedule,
                                             const StateSampler& sampler,
                                             const std::vector<double>& times) {
  if (times.empty()) throw ParameterError("sample_observations: no times");
  DynamicGraphObservations obs;
  obs.node_states.emplace();
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0 && !(times[k] > times[k - 1]))
      throw ParameterError("sample_observations: times must be strictly increasing");
    const Vector x = sampler.eval(times[k]);
    obs.snapshots.push_back({times[k], schedule.at(times[k])});
    obs.node_states->push_back(Matrix(x));
  }
  return obs;
}

void DatasetSpec::validate() const {
  if (n_nodes < 2) throw ParameterError("dataset.n_nodes: must be at least 2");
  if (snapshots < 2) throw ParameterError("dataset.snapshots: must be at least 2");
  if (!(horizon > 0.0)) throw ParameterError("dataset.horizon: must be positive");
  if (!(churn_drop >= 0.0 && churn_drop <= 1.0)) throw ParameterError("dataset.churn_drop: must be in [0,1]");
  if (!(churn_add >= 0.0 && churn_add <= 1.0)) throw ParameterError("dataset.churn_add: must be in [0,1]");
  if (churn_events < 0) throw ParameterError("dataset.churn_events: must be non-negative");
  for (double t : churn_times)
    if (!(t >= 0.0 && t <= horizon)) throw ParameterError("dataset.churn_times: must lie in [0, horizon]");
  if (!std::is_sorted(churn_times.begin(), churn_times.end()))
    throw ParameterError("dataset.churn_times: must be sorted");
  if (!(x0_upper() >= x0_lower())) throw ParameterError("dataset.x0_high: must be >= x0_low");
  if (dynamics == DynamicsKind::gene && x0_lower() < 0.0)
    throw ParameterError("dataset.x0_low: gene dynamics need non-negative states");
  if (!(rtol > 0.0)) throw ParameterError("dataset.rtol: must be positive");
}

GeneratedSystem generate_system(const DatasetSpec& spec) {
  spec.validate();
  const Topology base =
      gen_topology(spec.topology, spec.n_nodes, spec.topology_params, derive_seed(spec.seed, 1));

  ChurnSpec churn{spec.churn_drop, spec.churn_add, spec.churn_times};
  if (churn.event_times.empty()) {
    Rng rng(derive_seed(spec.seed, 2));
    for (int e = 0; e < spec.churn_events; ++e) churn.event_times.push_back(rng.uniform(0.0, spec.horizon));
    std::sort(churn.event_times.begin(), churn.event_times.end());
  }
  TopologySchedule schedule = evolve_topology(base, churn, derive_seed(spec.seed, 3));

  Rng x0_rng(derive_seed(spec.seed, 4));
  Vector x0(spec.n_nodes);
  for (int i = 0; i < spec.n_nodes; ++i) x0(i) = x0_rng.uniform(spec.x0_lower(), spec.x0_upper());

  DynamicsParams params;
  params.kind = spec.dynamics;
  params.k = spec.heat_k;
  params.b = Vector::Constant(spec.n_nodes, spec.gene_b);
  params.f_exp = spec.gene_f;
  params.h_exp = spec.gene_h;
  StateSampler sampler = simulate(schedule, x0, params, spec.horizon, spec.rtol);

  Rng time_rng(derive_seed(spec.seed, 5));
  std::vector<double> times;
  for (int attempt = 0;; ++attempt) {
    times.clear();
    for (int k = 0; k < spec.snapshots; ++k) times.push_back(time_rng.uniform(0.0, spec.horizon));
    std::sort(times.begin(), times.end());
    if (std::adjacent_find(times.begin(), times.end()) == times.end()) break;
    if (attempt > 100) throw NumericalError("generate_dataset: could not draw distinct times");
  }
  return GeneratedSystem{std::move(schedule), std::move(sampler), std::move(times)};
}

Dataset generate_dataset(const DatasetSpec& spec) {
  GeneratedSystem sys = generate_system(spec);
  return Dataset{spec, sample_observations(sys.schedule, sys.sampler, sys.times)};
}

}  // namespace gncde
