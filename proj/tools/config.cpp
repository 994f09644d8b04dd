#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gncde::cli {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParameterError(field + ": expected a number, got '" + raw + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& field, const std::string& raw) {
  std::vector<T> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number<T>(field, item));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

/// Wraps an enum parser so its error names the config field.
template <class F>
auto parse_enum(const std::string& field, const std::string& raw, F parse) {
  try {
    return parse(trim(raw));
  } catch (const ParameterError& e) {
    throw ParameterError(field + ": " + e.what());
  }
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string& field, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

struct Section {
  std::string name;
  std::vector<Field> fields;
};

#define GNCDE_NUM(KEY, TYPE, MEMBER)                                                                      \
  Field {                                                                                                 \
    KEY, [](ExperimentConfig& c, const std::string& f, const std::string& v) { MEMBER = parse_number<TYPE>(f, v); }, \
        [](const ExperimentConfig& c) {                                                                   \
          if constexpr (std::is_floating_point_v<TYPE>)                                                   \
            return fmt(static_cast<double>(MEMBER));                                                      \
          else                                                                                            \
            return std::to_string(MEMBER);                                                                \
        }                                                                                                 \
  }

#define GNCDE_ENUM(KEY, MEMBER, PARSE)                                                                        \
  Field {                                                                                                     \
    KEY, [](ExperimentConfig& c, const std::string& f, const std::string& v) { MEMBER = parse_enum(f, v, PARSE); }, \
        [](const ExperimentConfig& c) { return to_string(MEMBER); }                                          \
  }

const std::vector<Section>& schema() {
  static const std::vector<Section> sections = {
      {"dataset",
       {GNCDE_ENUM("dynamics", c.dataset.dynamics, parse_dynamics_kind),
        GNCDE_ENUM("topology", c.dataset.topology, parse_topology_kind),
        GNCDE_NUM("n_nodes", int, c.dataset.n_nodes),
        GNCDE_NUM("snapshots", int, c.dataset.snapshots),
        GNCDE_NUM("horizon", double, c.dataset.horizon),
        GNCDE_NUM("churn_drop", double, c.dataset.churn_drop),
        GNCDE_NUM("churn_add", double, c.dataset.churn_add),
        GNCDE_NUM("churn_events", int, c.dataset.churn_events),
        Field{"churn_times",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.dataset.churn_times = parse_list<double>(f, v);
              },
              [](const ExperimentConfig& c) { return join(c.dataset.churn_times); }},
        GNCDE_NUM("edge_prob", double, c.dataset.topology_params.edge_prob),
        GNCDE_NUM("attach", int, c.dataset.topology_params.attach),
        GNCDE_NUM("ring_neighbors", int, c.dataset.topology_params.ring_neighbors),
        GNCDE_NUM("rewire_prob", double, c.dataset.topology_params.rewire_prob),
        GNCDE_NUM("communities", int, c.dataset.topology_params.communities),
        GNCDE_NUM("p_in", double, c.dataset.topology_params.p_in),
        GNCDE_NUM("p_out", double, c.dataset.topology_params.p_out),
        GNCDE_NUM("heat_k", double, c.dataset.heat_k),
        GNCDE_NUM("gene_b", double, c.dataset.gene_b),
        GNCDE_NUM("gene_f", double, c.dataset.gene_f),
        GNCDE_NUM("gene_h", double, c.dataset.gene_h),
        Field{"x0_low",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.dataset.x0_low = parse_number<double>(f, v);
              },
              [](const ExperimentConfig& c) { return fmt(c.dataset.x0_lower()); }},
        Field{"x0_high",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.dataset.x0_high = parse_number<double>(f, v);
              },
              [](const ExperimentConfig& c) { return fmt(c.dataset.x0_upper()); }},
        GNCDE_NUM("rtol", double, c.dataset.rtol),
        GNCDE_NUM("seed", std::uint64_t, c.dataset.seed)}},
      {"model",
       {GNCDE_ENUM("variant", c.task.variant, parse_variant),
        GNCDE_ENUM("scheme", c.task.scheme, parse_scheme),
        GNCDE_NUM("embed_dim", int, c.task.embed_dim),
        GNCDE_NUM("layers", int, c.task.layers),
        GNCDE_NUM("hidden_dim", int, c.task.hidden_dim),
        GNCDE_NUM("direct_cap", int, c.task.direct_cap),
        GNCDE_ENUM("activation", c.task.activation, parse_activation)}},
      {"solver",
       {GNCDE_ENUM("method", c.task.solver.method, parse_method),
        GNCDE_NUM("step", double, c.task.solver.step),
        GNCDE_NUM("rtol", double, c.task.solver.rtol),
        GNCDE_NUM("atol", double, c.task.solver.atol),
        GNCDE_NUM("max_steps", std::size_t, c.task.solver.max_steps),
        GNCDE_ENUM("extrapolation", c.task.solver.extrapolation, parse_extrapolation_mode)}},
      {"train",
       {GNCDE_NUM("iterations", int, c.task.train.iterations),
        GNCDE_NUM("lr", double, c.task.train.lr),
        GNCDE_NUM("beta1", double, c.task.train.beta1),
        GNCDE_NUM("beta2", double, c.task.train.beta2),
        GNCDE_NUM("eps", double, c.task.train.eps),
        GNCDE_NUM("eval_every", int, c.task.train.eval_every),
        GNCDE_NUM("clip_norm", double, c.task.train.clip_norm),
        GNCDE_ENUM("loss", c.task.train.loss, parse_loss_kind),
        Field{"seeds",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.seeds = parse_list<std::uint64_t>(f, v);
                if (c.seeds.empty()) throw ParameterError(f + ": need at least one seed");
              },
              [](const ExperimentConfig& c) { return join(c.seeds); }}}},
      {"split",
       {Field{"train",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.task.split.train_count = parse_number<int>(f, v);
                c.split_given = true;
              },
              [](const ExperimentConfig& c) { return std::to_string(c.task.split.train_count); }},
        Field{"interp",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.task.split.interp_count = parse_number<int>(f, v);
                c.split_given = true;
              },
              [](const ExperimentConfig& c) { return std::to_string(c.task.split.interp_count); }},
        Field{"extrap",
              [](ExperimentConfig& c, const std::string& f, const std::string& v) {
                c.task.split.extrap_count = parse_number<int>(f, v);
                c.split_given = true;
              },
              [](const ExperimentConfig& c) { return std::to_string(c.task.split.extrap_count); }}}},
      {"task",
       {GNCDE_ENUM("kind", c.task.task, parse_task_kind),
        GNCDE_NUM("classes", int, c.task.classes),
        GNCDE_NUM("mask_fraction", double, c.task.mask_fraction)}},
      {"output",
       {Field{"dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); },
              [](const ExperimentConfig& c) { return c.output_dir; }}}},
  };
  return sections;
}

#undef GNCDE_NUM
#undef GNCDE_ENUM

}  // namespace

SplitSpec proportional_split(int total) {
  SplitSpec s;
  s.interp_count = static_cast<int>(std::lround(total / 6.0));
  s.extrap_count = s.interp_count;
  s.train_count = total - s.interp_count - s.extrap_count;
  return s;
}

void ExperimentConfig::finalize() {
  if (!split_given) task.split = proportional_split(dataset.snapshots);
  try {
    dataset.validate();
  } catch (const ParameterError& e) {
    throw ParameterError(std::string("[dataset] ") + e.what());
  }
  task.validate();
  try {
    task.split.validate(static_cast<std::size_t>(dataset.snapshots));
  } catch (const ParameterError& e) {
    throw ParameterError(std::string("[split] ") + e.what());
  }
  if (seeds.empty()) throw ParameterError("[train] seeds: need at least one seed");
  if (output_dir.empty()) throw ParameterError("[output] dir: must not be empty");
}

ExperimentConfig parse_config(const std::string& text, const std::string& name) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParameterError("config: " + std::string(e.message()) + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  c.name = name;
  for (const auto& [section_name, section] : tree) {
    const auto& sections = schema();
    const auto sec = std::find_if(sections.begin(), sections.end(),
                                  [&](const Section& s) { return s.name == section_name; });
    if (sec == sections.end()) {
      if (!section.data().empty())
        throw ParameterError("config: key '" + section_name + "' appears outside any section");
      throw ParameterError("config: unknown section [" + section_name + "]");
    }
    for (const auto& [key, value] : section) {
      const std::string field = "[" + section_name + "] " + key;
      const auto f = std::find_if(sec->fields.begin(), sec->fields.end(), [&](const Field& x) { return x.key == key; });
      if (f == sec->fields.end()) throw ParameterError("config: unknown key " + field);
      f->set(c, field, value.data());
    }
  }
  c.finalize();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (const auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return parse_config(buf.str(), name);
}

std::string config_to_ini(const ExperimentConfig& c) {
  std::ostringstream out;
  bool first = true;
  for (const Section& s : schema()) {
    if (!first) out << "\n";
    first = false;
    out << "[" << s.name << "]\n";
    for (const Field& f : s.fields) out << f.key << " = " << f.get(c) << "\n";
  }
  return out.str();
}

}  // namespace gncde::cli
