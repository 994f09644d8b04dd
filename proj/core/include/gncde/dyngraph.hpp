#pragma once

// Synthetic dynamic graphs: topology generators, edge churn, and the two
// ground-truth node dynamics (heat diffusion, gene regulation).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gncde/common.hpp"

namespace gncde {

/// Undirected, unweighted graph on a fixed node set. Adjacency is stored
/// dense with {0,1} entries, symmetric, zero diagonal.
struct Topology {
  Matrix adjacency;

  Topology() = default;
  explicit Topology(Matrix a) : adjacency(std::move(a)) {}
  static Topology empty(int n) { return Topology(Matrix::Zero(n, n)); }

  int n_nodes() const { return static_cast<int>(adjacency.rows()); }
  std::size_t edge_count() const;
  Vector degrees() const { return adjacency.rowwise().sum(); }
  /// Throws ParameterError if the invariants do not hold.
  void validate() const;
  SparseMatrix sparse() const { return adjacency.sparseView(); }

  bool operator==(const Topology& other) const { return adjacency == other.adjacency; }
};

struct TimedAdjacency {
  double time = 0.0;
  Topology topology;
};

/// Irregularly sampled snapshots. `missing`, when non-empty, holds one
/// row-major n*n flag vector per snapshot (true = channel unobserved).
struct DynamicGraphObservations {
  std::vector<TimedAdjacency> snapshots;
  std::optional<std::vector<Matrix>> node_states;
  std::vector<std::vector<bool>> missing;

  int n_nodes() const { return snapshots.empty() ? 0 : snapshots.front().topology.n_nodes(); }
  std::size_t size() const { return snapshots.size(); }
  std::vector<double> times() const;
  bool has_mask() const { return !missing.empty(); }
  bool channel_observed(std::size_t snapshot, int row, int col) const {
    return missing.empty() || !missing[snapshot][static_cast<std::size_t>(row) * n_nodes() + col];
  }
  /// Strictly increasing times, common node set, aligned states and mask.
  void validate() const;
  /// Subset by snapshot index (indices must be increasing).
  DynamicGraphObservations select(const std::vector<std::size_t>& indices) const;
};

enum class TopologyKind { grid, random, power_law, small_world, community };
enum class DynamicsKind { heat, gene };

TopologyKind parse_topology_kind(const std::string& s);
std::string to_string(TopologyKind k);
DynamicsKind parse_dynamics_kind(const std::string& s);
std::string to_string(DynamicsKind k);

/// Knobs for the generators. Only the fields relevant to a kind are read.
struct TopologyParams {
  double edge_prob = 0.05;       // random
  int attach = 2;                // power_law: edges per new node
  int ring_neighbors = 4;        // small_world: even lattice degree
  double rewire_prob = 0.1;      // small_world
  int communities = 4;           // community
  double p_in = 0.3;             // community
  double p_out = 0.01;           // community
};

/// Grid: r x c lattice with r the largest divisor of n not above sqrt(n).
/// Random: G(n, p). Power law: preferential attachment seeded with a clique
/// of attach+1 nodes. Small world: Watts-Strogatz ring with rewiring.
/// Community: planted partition with equal blocks.
Topology gen_topology(TopologyKind kind, int n, const TopologyParams& params, std::uint64_t seed);

struct ChurnSpec {
  double drop_prob = 0.0;
  double add_prob = 0.0;
  std::vector<double> event_times;
};

/// Piecewise-constant, right-continuous topology map.
class TopologySchedule {
 public:
  TopologySchedule(std::vector<double> event_times, std::vector<Topology> segments);
  static TopologySchedule constant(Topology t) { return TopologySchedule({}, {std::move(t)}); }

  const Topology& at(double t) const { return segments_[segment_index(t)]; }
  std::size_t segment_index(double t) const;
  const std::vector<double>& event_times() const { return events_; }
  const std::vector<Topology>& segments() const { return segments_; }
  int n_nodes() const { return segments_.front().n_nodes(); }

 private:
  std::vector<double> events_;
  std::vector<Topology> segments_;
};

/// At each event every present edge is dropped w.p. drop_prob and every
/// absent edge (i<j) is added w.p. add_prob.
TopologySchedule evolve_topology(const Topology& base, const ChurnSpec& churn, std::uint64_t seed);

struct DynamicsParams {
  DynamicsKind kind = DynamicsKind::heat;
  double k = 1.0;        // heat: shared diffusion coefficient
  Vector b;              // gene: degradation rates, one per node
  double f_exp = 1.0;    // gene: degradation exponent (1 or 2)
  double h_exp = 2.0;    // gene: Hill exponent
  void validate(int n) const;
};

/// Dense-in-time trajectory of a simulated system. Holds the accepted RK4
/// grid of every topology segment and evaluates intermediate times by a
/// single partial step from the preceding grid point.
class StateSampler {
 public:
  Vector eval(double t) const;
  double horizon() const { return horizon_; }
  int n_nodes() const { return static_cast<int>(x0_.size()); }
  /// Total RK4 steps on the accepted grids (diagnostics).
  std::size_t grid_steps() const;

 private:
  friend StateSampler simulate(const TopologySchedule&, const Vector&, const DynamicsParams&,
                               double, double);
  struct Segment {
    double start = 0.0;
    double end = 0.0;
    double step = 0.0;
    std::vector<Vector> grid;  // states at start + i*step, last at end
    SparseMatrix adjacency;
    Vector degree;
  };

  Vector rhs(const Segment& seg, const Vector& x) const;
  Vector rk4_step(const Segment& seg, const Vector& x, double h) const;

  DynamicsParams params_;
  Vector x0_;
  double horizon_ = 0.0;
  std::vector<Segment> segments_;
};

/// Integrates the dynamics over [0, horizon] segment by segment. Each segment
/// doubles its RK4 step count until two successive resolutions agree to
/// rtol * max(1, |x|_inf) at the segment end.
StateSampler simulate(const TopologySchedule& schedule, const Vector& x0,
                      const DynamicsParams& params, double horizon, double rtol);

StateSampler simulate_heat(const TopologySchedule& schedule, const Vector& x0, double k,
                           double horizon, double rtol);
StateSampler simulate_gene(const TopologySchedule& schedule, const Vector& x0,
                           const DynamicsParams& params, double horizon, double rtol);

/// Snapshot (topology, state as an n x 1 matrix) at each requested time.
DynamicGraphObservations sample_observations(const TopologySchedule& schedule,
                                             const StateSampler& sampler,
                                             const std::vector<double>& times);

/// Everything needed to regenerate a dataset bit for bit.
struct DatasetSpec {
  DynamicsKind dynamics = DynamicsKind::heat;
  TopologyKind topology = TopologyKind::grid;
  int n_nodes = 400;
  int snapshots = 120;
  double horizon = 5.0;
  TopologyParams topology_params;
  double churn_drop = 0.05;
  double churn_add = 0.001;
  int churn_events = 5;
  std::vector<double> churn_times;  // overrides churn_events when non-empty
  double heat_k = 1.0;
  double gene_b = 1.0;
  double gene_f = 1.0;
  double gene_h = 2.0;
  std::optional<double> x0_low;   // default 0
  std::optional<double> x0_high;  // default 25 (heat) or 2 (gene)
  double rtol = 1e-8;
  std::uint64_t seed = 0;

  double x0_lower() const { return x0_low.value_or(0.0); }
  double x0_upper() const {
    return x0_high.value_or(dynamics == DynamicsKind::heat ? 25.0 : 2.0);
  }
  void validate() const;
};

struct Dataset {
  DatasetSpec spec;
  DynamicGraphObservations observations;
};

/// Intermediate products of a generation run, kept for re-sampling truth.
struct GeneratedSystem {
  TopologySchedule schedule;
  StateSampler sampler;
  std::vector<double> times;
};

GeneratedSystem generate_system(const DatasetSpec& spec);
Dataset generate_dataset(const DatasetSpec& spec);

std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace gncde
