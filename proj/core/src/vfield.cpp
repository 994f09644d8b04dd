#include "gncde/vfield.hpp"

namespace gncde {

Variant parse_variant(const std::string& s) {
  if (s == "gncde_full") return Variant::gncde_full;
  if (s == "gncde_linear") return Variant::gncde_linear;
  if (s == "gnode") return Variant::gnode;
  if (s == "neural_cde_plain") return Variant::neural_cde_plain;
  if (s == "gncde_approx") return Variant::gncde_approx;
  if (s == "gncde_direct") return Variant::gncde_direct;
  throw ParameterError("unknown model variant '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gncde_full: return "gncde_full";
    case Variant::gncde_linear: return "gncde_linear";
    case Variant::gnode: return "gnode";
    case Variant::neural_cde_plain: return "neural_cde_plain";
    case Variant::gncde_approx: return "gncde_approx";
    case Variant::gncde_direct: return "gncde_direct";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ParameterError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "sigmoid"; }

Head parse_head(const std::string& s) {
  if (s == "attributes") return Head::attributes;
  if (s == "classify") return Head::classify;
  if (s == "link") return Head::link;
  throw ParameterError("unknown task head '" + s + "'");
}

std::string to_string(Head h) {
  switch (h) {
    case Head::attributes: return "attributes";
    case Head::classify: return "classify";
    case Head::link: return "link";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelSpec

void ModelSpec::validate() const {
  if (n_nodes < 1) throw ParameterError("model.n_nodes: must be positive");
  if (embed_dim < 1) throw ParameterError("model.embed_dim: must be positive");
  if (out_dim < 1) throw ParameterError("model.out_dim: must be positive");
  if (layers < 1) throw ParameterError("model.layers: must be at least 1");
  if (feature_dim < 0 || init_feature_dim < 0 || hidden_dim < 0)
    throw ParameterError("model: feature and hidden widths must be non-negative");
  if (direct_cap < 1) throw ParameterError("model.direct_cap: must be positive");
  if (!std::isfinite(structural_scale)) throw ParameterError("model.structural_scale: must be finite");
  if ((variant == Variant::gncde_direct || variant == Variant::gncde_linear) && n_nodes > direct_cap) {
    throw CapabilityError(to_string(variant) + " materialises a " + std::to_string(embed_dim * embed_dim) + " x " +
                          std::to_string(2 * n_nodes * n_nodes) + " projection; n = " + std::to_string(n_nodes) +
                          " exceeds direct_cap = " + std::to_string(direct_cap) +
                          ". Use gncde_approx or gncde_full instead");
  }
  if (variant == Variant::neural_cde_plain && (head != Head::attributes || feature_dim > 0))
    throw CapabilityError("neural_cde_plain supports the attribute task without node features only");
}

bool ModelSpec::uses_projection() const {
  return variant == Variant::gncde_direct || variant == Variant::gncde_linear ||
         (variant == Variant::gncde_full && n_nodes <= direct_cap);
}

bool ModelSpec::uses_fusion() const {
  return variant == Variant::gncde_approx || (variant == Variant::gncde_full && n_nodes > direct_cap);
}

int ModelSpec::plain_path_dim() const {
  return n_nodes <= direct_cap ? n_nodes * n_nodes + 1 : n_nodes + 1;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <class A, class B, class F>
void transform_weights(const Weights<A>& in, Weights<B>& out, F f) {
  out.layers.clear();
  for (const auto& l : in.layers) out.layers.push_back(f(l));
  out.fusion = f(in.fusion);
  out.projection = f(in.projection);
  out.mixing = f(in.mixing);
  out.init = f(in.init);
  out.dec_w1 = f(in.dec_w1);
  out.dec_b1 = f(in.dec_b1);
  out.dec_w2 = f(in.dec_w2);
  out.dec_b2 = f(in.dec_b2);
  out.cde_w1 = f(in.cde_w1);
  out.cde_b1 = f(in.cde_b1);
  out.cde_w2 = f(in.cde_w2);
  out.cde_b2 = f(in.cde_b2);
}

struct Shape {
  std::string name;
  Eigen::Index rows, cols;
};

std::vector<Shape> expected_shapes(const ModelSpec& s) {
  const Eigen::Index n = s.n_nodes, d = s.embed_dim, c = s.out_dim, h = s.hidden();
  std::vector<Shape> out;
  const bool plain = s.variant == Variant::neural_cde_plain;
  if (!plain) {
    for (int l = 0; l < s.layers; ++l) out.push_back({"layer" + std::to_string(l), l == 0 ? d + s.feature_dim : d, d});
  }
  if (s.uses_fusion()) out.push_back({"fusion", 2 * n, n});
  if (s.uses_projection()) out.push_back({"projection", d * d, 2 * n * n});
  if (s.variant == Variant::gncde_linear) out.push_back({"mixing", n, n});
  const Eigen::Index p = s.plain_path_dim();
  if (plain) {
    out.push_back({"init", p + n * s.init_feature_dim, d});
    out.push_back({"dec_w1", d, n * c});
    out.push_back({"dec_b1", 1, n * c});
    out.push_back({"cde_w1", d, h});
    out.push_back({"cde_b1", 1, h});
    out.push_back({"cde_w2", h, d * p});
    out.push_back({"cde_b2", 1, d * p});
    return out;
  }
  out.push_back({"init", n + 1 + s.init_feature_dim, d});
  switch (s.head) {
    case Head::attributes:
      out.push_back({"dec_w1", d, c});
      out.push_back({"dec_b1", 1, c});
      break;
    case Head::classify:
      out.push_back({"dec_w1", d, h});
      out.push_back({"dec_b1", 1, h});
      out.push_back({"dec_w2", h, c});
      out.push_back({"dec_b2", 1, c});
      break;
    case Head::link:
      out.push_back({"dec_w1", 2 * d, h});
      out.push_back({"dec_b1", 1, h});
      out.push_back({"dec_w2", h, 1});
      out.push_back({"dec_b2", 1, 1});
      break;
  }
  return out;
}

Matrix& slot(Weights<Matrix>& w, const std::string& name) {
  if (name.rfind("layer", 0) == 0) {
    const auto l = static_cast<std::size_t>(std::stoul(name.substr(5)));
    if (w.layers.size() <= l) w.layers.resize(l + 1);
    return w.layers[l];
  }
  if (name == "fusion") return w.fusion;
  if (name == "projection") return w.projection;
  if (name == "mixing") return w.mixing;
  if (name == "init") return w.init;
  if (name == "dec_w1") return w.dec_w1;
  if (name == "dec_b1") return w.dec_b1;
  if (name == "dec_w2") return w.dec_w2;
  if (name == "dec_b2") return w.dec_b2;
  if (name == "cde_w1") return w.cde_w1;
  if (name == "cde_b1") return w.cde_b1;
  if (name == "cde_w2") return w.cde_w2;
  if (name == "cde_b2") return w.cde_b2;
  throw ParameterError("unknown weight '" + name + "'");
}

bool is_bias(const std::string& name) { return name == "dec_b1" || name == "dec_b2" || name == "cde_b1" || name == "cde_b2"; }

}  // namespace

std::size_t VectorFieldParams::size() const {
  std::size_t total = 0;
  weights.visit([&](const std::string&, const Matrix& m) { total += static_cast<std::size_t>(m.size()); });
  return total;
}

Vector VectorFieldParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  Eigen::Index at = 0;
  weights.visit([&](const std::string&, const Matrix& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  });
  return flat;
}

void VectorFieldParams::unflatten(const Vector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(size())) throw ParameterError("unflatten: length mismatch");
  Eigen::Index at = 0;
  weights.visit([&](const std::string&, Matrix& m) {
    Eigen::Map<Vector>(m.data(), m.size()) = flat.segment(at, m.size());
    at += m.size();
  });
}

void VectorFieldParams::validate() const {
  spec.validate();
  const auto shapes = expected_shapes(spec);
  std::size_t i = 0;
  weights.visit([&](const std::string& name, const Matrix& m) {
    if (i >= shapes.size() || shapes[i].name != name)
      throw ParameterError("parameters: unexpected tensor '" + name + "' for " + to_string(spec.variant));
    if (m.rows() != shapes[i].rows || m.cols() != shapes[i].cols)
      throw ParameterError("parameters: tensor '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", expected " + std::to_string(shapes[i].rows) + "x" +
                           std::to_string(shapes[i].cols));
    if (!m.allFinite()) throw ParameterError("parameters: tensor '" + name + "' has non-finite entries");
    ++i;
  });
  if (i != shapes.size()) throw ParameterError("parameters: missing tensors for " + to_string(spec.variant));
}

VectorFieldParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  VectorFieldParams p;
  p.spec = spec;
  Rng rng(derive_seed(seed, 11));
  const Eigen::Index n = spec.n_nodes;
  for (const auto& s : expected_shapes(spec)) {
    Matrix& m = slot(p.weights, s.name);
    if (s.name == "fusion") {
      m = Matrix::Zero(2 * n, n);
      m.topRows(n).setIdentity();
      m.bottomRows(n) = 0.1 * Matrix::Identity(n, n);
    } else if (s.name == "mixing") {
      m = Matrix::Identity(n, n);
    } else if (is_bias(s.name)) {
      m = Matrix::Zero(s.rows, s.cols);
    } else {
      const double a = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      m = uniform_matrix(rng, s.rows, s.cols, -a, a);
    }
  }
  return p;
}

Weights<Var> to_tape(const Weights<Matrix>& w, Tape& tape) {
  Weights<Var> out;
  transform_weights(w, out, [&](const Matrix& m) { return m.size() > 0 ? tape.variable(m) : Var(); });
  return out;
}

Weights<Matrix> gradients(const Weights<Var>& w, const Tape& tape) {
  Weights<Matrix> out;
  transform_weights(w, out, [&](const Var& v) { return v.valid() ? tape.grad(v) : Matrix(); });
  return out;
}

// ---------------------------------------------------------------------------
// Structural inputs

SparseMatrix normalize_adjacency(const SparseMatrix& a, bool allow_negative) {
  if (a.rows() != a.cols()) throw ParameterError("normalize_adjacency: matrix must be square");
  const Eigen::Index n = a.rows();
  SparseMatrix m = allow_negative ? a : SparseMatrix(a.cwiseMax(SparseMatrix(n, n)));
  SparseMatrix eye(n, n);
  eye.setIdentity();
  m += eye;
  Vector deg = m * Vector::Ones(n);
  Vector inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt(i) = 1.0 / std::sqrt(std::max(deg(i), 1.0));
  SparseMatrix out = inv_sqrt.asDiagonal() * m * inv_sqrt.asDiagonal();
  out.prune(0.0);
  return out;
}

Matrix normalize_adjacency(const Matrix& a, bool allow_negative) {
  return Matrix(normalize_adjacency(SparseMatrix(a.sparseView()), allow_negative));
}

Matrix augmented_derivative_vector(double dt_ds, const SparseMatrix& d_adj) {
  const Eigen::Index n = d_adj.rows();
  Matrix v = Matrix::Zero(2 * n * n, 1);
  for (Eigen::Index k = 0; k < n * n; ++k) v(2 * k, 0) = dt_ds;
  for (int c = 0; c < d_adj.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(d_adj, c); it; ++it) v(2 * (it.row() * n + it.col()) + 1, 0) = it.value();
  return v;
}

namespace {

Matrix plain_control(const ModelSpec& spec, double dt_ds, const SparseMatrix& d_adj) {
  const int n = spec.n_nodes;
  Matrix v = Matrix::Zero(spec.plain_path_dim(), 1);
  v(0, 0) = dt_ds;
  const bool full = n <= spec.direct_cap;
  for (int c = 0; c < d_adj.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(d_adj, c); it; ++it) {
      if (full)
        v(1 + it.row() * n + it.col(), 0) = it.value();
      else
        v(1 + it.row(), 0) += it.value();
    }
  }
  return v;
}

}  // namespace

StageInput make_stage_input(const ModelSpec& spec, const GraphPath& path, const FeaturePath* features, double s,
                            Side side, ExtrapolationMode mode) {
  if (path.n_nodes() != spec.n_nodes) throw ParameterError("stage input: path node count differs from model");
  StageInput in;
  in.s = s;
  const SparsePathDerivative d = path.eval_derivative_extended(s, mode, side);
  in.dt_ds = d.d_time;
  in.path_held = mode == ExtrapolationMode::hold && (s > path.param_end() || (s == path.param_end() && side == Side::right));

  if (path.scheme() == Scheme::rectilinear) {
    if (s < path.param_end() || (s == path.param_end() && side == Side::left)) {
      in.clock = path.eval_derivative_sparse(s, side).d_time;
    } else {
      const auto& ts = path.knot_times();
      in.clock = ts[ts.size() - 1] - ts[ts.size() - 2];
    }
  }

  const Variant v = spec.variant;
  if (v == Variant::gnode) {
    in.floor_norm = std::make_shared<const SparseMatrix>(
        normalize_adjacency(path.floor_adjacency(path.time_of_param(s), side)));
  }
  if (v == Variant::gncde_direct || v == Variant::gncde_approx || v == Variant::gncde_full) {
    in.a_norm = std::make_shared<const SparseMatrix>(normalize_adjacency(path.eval_extended(s, mode).adjacency));
  }
  if (spec.uses_fusion()) in.d_adj = std::make_shared<const SparseMatrix>(d.d_adjacency);
  if (spec.uses_projection()) in.control = augmented_derivative_vector(d.d_time, d.d_adjacency);
  if (v == Variant::neural_cde_plain) in.control = plain_control(spec, d.d_time, d.d_adjacency);
  if (spec.feature_dim > 0) {
    if (features == nullptr || features->empty()) throw ParameterError("stage input: model expects node features");
    in.features = features->eval(path.time_of_param(s), mode);
    if (in.features.cols() != spec.feature_dim || in.features.rows() != spec.n_nodes)
      throw ParameterError("stage input: feature shape does not match model");
  }
  return in;
}

// ---------------------------------------------------------------------------
// Model functions

namespace {

template <class T>
T activate(Activation a, const T& x) {
  return a == Activation::relu ? relu(x) : sigmoid(x);
}

/// Propagation operator P applied in each message-passing layer.
template <class T>
struct Propagation {
  SparsePtr a;
  double a_scale = 1.0;
  SparsePtr da;
  bool fused = false;
  T top, bot;  // W^DR blocks when fused
  const T* mixing = nullptr;

  T apply(const T& x) const {
    T out;
    bool has = false;
    auto accumulate = [&](T term) {
      out = has ? add(out, term) : std::move(term);
      has = true;
    };
    if (a && a_scale != 0.0) {
      T ax = fused ? matmul(a, matmul(top, x)) : matmul(a, x);
      accumulate(a_scale == 1.0 ? ax : scale(ax, a_scale));
    }
    if (fused && da && da->nonZeros() > 0) accumulate(matmul(da, matmul(bot, x)));
    if (mixing != nullptr) accumulate(matmul(*mixing, x));
    if (!has) return scale(x, 0.0);
    return out;
  }
};

template <class T>
T message_pass(const ModelSpec& spec, const Weights<T>& w, const Propagation<T>& prop, const Matrix& features,
               const T& z) {
  if (static_cast<int>(w.layers.size()) != spec.layers) throw ParameterError("field: layer count mismatch");
  if (features.size() > 0 && features.cols() != spec.feature_dim)
    throw ParameterError("field: feature width does not match model");
  if (features.size() == 0 && spec.feature_dim > 0) throw ParameterError("field: model expects node features");
  T x = features.size() > 0 ? hconcat(z, features) : z;
  for (const auto& layer : w.layers) x = activate(spec.activation, prop.apply(matmul(x, layer)));
  return x;
}

template <class T>
T project(const ModelSpec& spec, const Weights<T>& w, const T& h, const Matrix& control) {
  const Eigen::Index d = spec.embed_dim;
  if (control.rows() != 2 * static_cast<Eigen::Index>(spec.n_nodes) * spec.n_nodes)
    throw ParameterError("field: control vector has the wrong length");
  return matmul(h, reshape(matmul(w.projection, control), d, d));
}

void check_state(const ModelSpec& spec, const Matrix& z) {
  if (z.rows() != spec.n_nodes || z.cols() != spec.embed_dim)
    throw ParameterError("field: state must be n x d (" + std::to_string(spec.n_nodes) + " x " +
                         std::to_string(spec.embed_dim) + "), got " + std::to_string(z.rows()) + " x " +
                         std::to_string(z.cols()));
}

template <class T>
Propagation<T> fused_propagation(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& a, const SparsePtr& da) {
  Propagation<T> p;
  p.a = a;
  p.da = da;
  p.fused = true;
  p.top = rows_block(w.fusion, 0, spec.n_nodes);
  p.bot = rows_block(w.fusion, spec.n_nodes, spec.n_nodes);
  return p;
}

}  // namespace

template <class T>
T init_embedding(const ModelSpec& spec, const Weights<T>& w, double t0, const Matrix& a_t0, const Matrix& f_t0) {
  const Eigen::Index n = spec.n_nodes;
  if (a_t0.rows() != n || a_t0.cols() != n) throw ParameterError("init_embedding: adjacency shape mismatch");
  const Eigen::Index m = spec.init_feature_dim;
  if (m > 0 && (f_t0.rows() != n || f_t0.cols() != m))
    throw ParameterError("init_embedding: attribute matrix must be n x " + std::to_string(m));
  if (spec.variant == Variant::neural_cde_plain) {
    const Eigen::Index p = spec.plain_path_dim();
    Matrix x = Matrix::Zero(1, p + n * m);
    x(0, 0) = t0;
    if (n <= spec.direct_cap) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) x(0, 1 + i * n + j) = a_t0(i, j);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) x(0, 1 + i) = a_t0.row(i).sum();
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) x(0, p + i * m + j) = f_t0(i, j);
    return matmul(x, w.init);
  }
  Matrix x(n, n + 1 + m);
  x.leftCols(n) = a_t0;
  x.col(n).setConstant(t0);
  if (m > 0) x.rightCols(m) = f_t0;
  return matmul(x, w.init);
}

template <class T>
T field_direct(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& a_norm, double dt_ds,
               const SparseMatrix& d_adj, const Matrix& features, const T& z) {
  check_state(spec, value_of(z));
  if (spec.n_nodes > spec.direct_cap)
    throw CapabilityError("direct field: n = " + std::to_string(spec.n_nodes) + " exceeds direct_cap = " +
                          std::to_string(spec.direct_cap) + "; use the approximate field");
  Propagation<T> p;
  p.a = a_norm;
  const T h = message_pass(spec, w, p, features, z);
  return project(spec, w, h, augmented_derivative_vector(dt_ds, d_adj));
}

template <class T>
T field_linear(const ModelSpec& spec, const Weights<T>& w, double dt_ds, const SparseMatrix& d_adj,
               const Matrix& features, const T& z) {
  check_state(spec, value_of(z));
  if (spec.n_nodes > spec.direct_cap)
    throw CapabilityError("linear field: n = " + std::to_string(spec.n_nodes) + " exceeds direct_cap = " +
                          std::to_string(spec.direct_cap));
  Propagation<T> p;
  p.mixing = &w.mixing;
  const T h = message_pass(spec, w, p, features, z);
  return project(spec, w, h, augmented_derivative_vector(dt_ds, d_adj));
}

template <class T>
T field_approx(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& a_norm, const SparsePtr& d_adj,
               const Matrix& features, const T& z) {
  check_state(spec, value_of(z));
  if (!is_present(w.fusion)) throw ParameterError("approximate field: fusion weight missing");
  return message_pass(spec, w, fused_propagation(spec, w, a_norm, d_adj), features, z);
}

template <class T>
T field_gnode(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& floor_norm, double clock,
              const Matrix& features, const T& z) {
  check_state(spec, value_of(z));
  Propagation<T> p;
  p.a = floor_norm;
  const T h = message_pass(spec, w, p, features, z);
  return clock == 1.0 ? h : scale(h, clock);
}

template <class T>
T field_plain(const ModelSpec& spec, const Weights<T>& w, const Matrix& control, const T& z) {
  const Eigen::Index wd = spec.embed_dim, p = spec.plain_path_dim();
  if (value_of(z).rows() != 1 || value_of(z).cols() != wd)
    throw ParameterError("plain field: state must be 1 x " + std::to_string(wd));
  if (control.rows() != p) throw ParameterError("plain field: control has the wrong length");
  const T hidden = activate(spec.activation, add_row_bias(matmul(z, w.cde_w1), w.cde_b1));
  const T out = tanh(add_row_bias(matmul(hidden, w.cde_w2), w.cde_b2));
  return matmul(Matrix(control.transpose()), reshape(out, p, wd));
}

template <class T>
T field_full(const ModelSpec& spec, const Weights<T>& w, const StageInput& in, const T& z) {
  check_state(spec, value_of(z));
  if (spec.uses_projection()) {
    Propagation<T> p;
    p.a = in.a_norm;
    p.a_scale = spec.structural_scale;
    if (is_present(w.mixing)) p.mixing = &w.mixing;
    const T h = message_pass(spec, w, p, in.features, z);
    return project(spec, w, h, in.control);
  }
  Propagation<T> p = fused_propagation(spec, w, in.a_norm, in.d_adj);
  p.a_scale = spec.structural_scale;
  if (is_present(w.mixing)) p.mixing = &w.mixing;
  return message_pass(spec, w, p, in.features, z);
}

template <class T>
T field(const ModelSpec& spec, const Weights<T>& w, const StageInput& in, const T& z) {
  switch (spec.variant) {
    case Variant::gncde_full: return field_full(spec, w, in, z);
    case Variant::gncde_direct: {
      check_state(spec, value_of(z));
      Propagation<T> p;
      p.a = in.a_norm;
      return project(spec, w, message_pass(spec, w, p, in.features, z), in.control);
    }
    case Variant::gncde_linear: {
      check_state(spec, value_of(z));
      Propagation<T> p;
      p.mixing = &w.mixing;
      return project(spec, w, message_pass(spec, w, p, in.features, z), in.control);
    }
    case Variant::gncde_approx:
      // The approximate field integrates against the time channel of the
      // augmented path, which stops advancing once the path is held.
      if (in.path_held) {
        check_state(spec, value_of(z));
        return scale(z, 0.0);
      }
      return field_approx(spec, w, in.a_norm, in.d_adj, in.features, z);
    case Variant::gnode: return field_gnode(spec, w, in.floor_norm, in.clock, in.features, z);
    case Variant::neural_cde_plain: return field_plain(spec, w, in.control, z);
  }
  throw ParameterError("field: unknown variant");
}

template <class T>
T decode(const ModelSpec& spec, const Weights<T>& w, const T& z) {
  if (spec.variant == Variant::neural_cde_plain) {
    return reshape(add_row_bias(matmul(z, w.dec_w1), w.dec_b1), spec.n_nodes, spec.out_dim);
  }
  switch (spec.head) {
    case Head::attributes: return add_row_bias(matmul(z, w.dec_w1), w.dec_b1);
    case Head::classify:
      return add_row_bias(matmul(relu(add_row_bias(matmul(z, w.dec_w1), w.dec_b1)), w.dec_w2), w.dec_b2);
    case Head::link: break;
  }
  throw ParameterError("decode: the link head scores node pairs; use decode_links");
}

template <class T>
T decode_links(const ModelSpec& spec, const Weights<T>& w, const T& z, const std::vector<int>& src,
               const std::vector<int>& dst) {
  if (spec.head != Head::link) throw ParameterError("decode_links: model head is not 'link'");
  if (src.size() != dst.size() || src.empty()) throw ParameterError("decode_links: need matching, non-empty pair lists");
  const T x = hconcat(gather_rows(z, src), gather_rows(z, dst));
  return add_row_bias(matmul(relu(add_row_bias(matmul(x, w.dec_w1), w.dec_b1)), w.dec_w2), w.dec_b2);
}

#define GNCDE_INSTANTIATE(T)                                                                                  \
  template T init_embedding<T>(const ModelSpec&, const Weights<T>&, double, const Matrix&, const Matrix&);   \
  template T field<T>(const ModelSpec&, const Weights<T>&, const StageInput&, const T&);                     \
  template T field_direct<T>(const ModelSpec&, const Weights<T>&, const SparsePtr&, double,                  \
                             const SparseMatrix&, const Matrix&, const T&);                                  \
  template T field_linear<T>(const ModelSpec&, const Weights<T>&, double, const SparseMatrix&, const Matrix&, \
                             const T&);                                                                      \
  template T field_approx<T>(const ModelSpec&, const Weights<T>&, const SparsePtr&, const SparsePtr&,        \
                             const Matrix&, const T&);                                                       \
  template T field_gnode<T>(const ModelSpec&, const Weights<T>&, const SparsePtr&, double, const Matrix&,    \
                            const T&);                                                                       \
  template T field_plain<T>(const ModelSpec&, const Weights<T>&, const Matrix&, const T&);                   \
  template T field_full<T>(const ModelSpec&, const Weights<T>&, const StageInput&, const T&);                \
  template T decode<T>(const ModelSpec&, const Weights<T>&, const T&);                                       \
  template T decode_links<T>(const ModelSpec&, const Weights<T>&, const T&, const std::vector<int>&,         \
                             const std::vector<int>&);

GNCDE_INSTANTIATE(Matrix)
GNCDE_INSTANTIATE(Var)

#undef GNCDE_INSTANTIATE

}  // namespace gncde
