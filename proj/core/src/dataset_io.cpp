#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gncde/dyngraph.hpp"

namespace gncde {

using nlohmann::json;

namespace {

json spec_to_json(const DatasetSpec& s) {
  json j;
  j["dynamics"] = to_string(s.dynamics);
  j["topology"] = to_string(s.topology);
  j["n_nodes"] = s.n_nodes;
  j["snapshots"] = s.snapshots;
  j["horizon"] = s.horizon;
  j["edge_prob"] = s.topology_params.edge_prob;
  j["attach"] = s.topology_params.attach;
  j["ring_neighbors"] = s.topology_params.ring_neighbors;
  j["rewire_prob"] = s.topology_params.rewire_prob;
  j["communities"] = s.topology_params.communities;
  j["p_in"] = s.topology_params.p_in;
  j["p_out"] = s.topology_params.p_out;
  j["churn_drop"] = s.churn_drop;
  j["churn_add"] = s.churn_add;
  j["churn_events"] = s.churn_events;
  j["churn_times"] = s.churn_times;
  j["heat_k"] = s.heat_k;
  j["gene_b"] = s.gene_b;
  j["gene_f"] = s.gene_f;
  j["gene_h"] = s.gene_h;
  j["x0_low"] = s.x0_lower();
  j["x0_high"] = s.x0_upper();
  j["rtol"] = s.rtol;
  return j;
}

DatasetSpec spec_from_json(const json& j, std::uint64_t seed) {
  DatasetSpec s;
  s.dynamics = parse_dynamics_kind(j.at("dynamics").get<std::string>());
  s.topology = parse_topology_kind(j.at("topology").get<std::string>());
  s.n_nodes = j.at("n_nodes").get<int>();
  s.snapshots = j.at("snapshots").get<int>();
  s.horizon = j.at("horizon").get<double>();
  s.topology_params.edge_prob = j.at("edge_prob").get<double>();
  s.topology_params.attach = j.at("attach").get<int>();
  s.topology_params.ring_neighbors = j.at("ring_neighbors").get<int>();
  s.topology_params.rewire_prob = j.at("rewire_prob").get<double>();
  s.topology_params.communities = j.at("communities").get<int>();
  s.topology_params.p_in = j.at("p_in").get<double>();
  s.topology_params.p_out = j.at("p_out").get<double>();
  s.churn_drop = j.at("churn_drop").get<double>();
  s.churn_add = j.at("churn_add").get<double>();
  s.churn_events = j.at("churn_events").get<int>();
  s.churn_times = j.at("churn_times").get<std::vector<double>>();
  s.heat_k = j.at("heat_k").get<double>();
  s.gene_b = j.at("gene_b").get<double>();
  s.gene_f = j.at("gene_f").get<double>();
  s.gene_h = j.at("gene_h").get<double>();
  s.x0_low = j.at("x0_low").get<double>();
  s.x0_high = j.at("x0_high").get<double>();
  s.rtol = j.at("rtol").get<double>();
  s.seed = seed;
  return s;
}

}  // namespace

std::string dataset_to_json(const Dataset& dataset) {
  const auto& obs = dataset.observations;
  obs.validate();
  const int n = obs.n_nodes();
  json j;
  j["n_nodes"] = n;
  j["n_attributes"] = obs.node_states ? obs.node_states->front().cols() : 0;
  j["times"] = obs.times();

  json adjacency = json::array();
  for (const auto& snap : obs.snapshots) {
    std::vector<int> flat;
    flat.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) flat.push_back(snap.topology.adjacency(i, k) != 0.0 ? 1 : 0);
    adjacency.push_back(std::move(flat));
  }
  j["adjacency"] = std::move(adjacency);

  json states = json::array();
  if (obs.node_states) {
    for (const auto& s : *obs.node_states) {
      std::vector<double> flat;
      flat.reserve(static_cast<std::size_t>(s.size()));
      for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index k = 0; k < s.cols(); ++k) flat.push_back(s(i, k));
      states.push_back(std::move(flat));
    }
  }
  j["states"] = std::move(states);
  j["generator_config"] = spec_to_json(dataset.spec);
  j["seed"] = dataset.spec.seed;
  return j.dump() + "\n";
}

Dataset dataset_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("dataset: malformed JSON: ") + e.what());
  }
  try {
    Dataset d;
    const int n = j.at("n_nodes").get<int>();
    const int m = j.at("n_attributes").get<int>();
    const auto times = j.at("times").get<std::vector<double>>();
    const auto& adjacency = j.at("adjacency");
    const auto& states = j.at("states");
    if (adjacency.size() != times.size()) throw ParameterError("dataset: adjacency/time count mismatch");
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto flat = adjacency[k].get<std::vector<int>>();
      if (flat.size() != static_cast<std::size_t>(n) * n)
        throw ParameterError("dataset: adjacency snapshot has wrong size");
      Matrix a(n, n);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c) a(i, c) = flat[static_cast<std::size_t>(i) * n + c];
      d.observations.snapshots.push_back({times[k], Topology(std::move(a))});
    }
    if (m > 0) {
      if (states.size() != times.size()) throw ParameterError("dataset: states/time count mismatch");
      d.observations.node_states.emplace();
      for (const auto& row : states) {
        const auto flat = row.get<std::vector<double>>();
        if (flat.size() != static_cast<std::size_t>(n) * m)
          throw ParameterError("dataset: state snapshot has wrong size");
        Matrix s(n, m);
        for (int i = 0; i < n; ++i)
          for (int c = 0; c < m; ++c) s(i, c) = flat[static_cast<std::size_t>(i) * m + c];
        d.observations.node_states->push_back(std::move(s));
      }
    }
    d.spec = spec_from_json(j.at("generator_config"), j.at("seed").get<std::uint64_t>());
    d.observations.validate();
    for (const auto& s : d.observations.snapshots) s.topology.validate();
    return d;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("dataset: missing or mistyped field: ") + e.what());
  }
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  const std::string text = dataset_to_json(dataset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_json(ss.str());
}

}  // namespace gncde
