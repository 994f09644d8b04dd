#pragma once

// GCN-parameterised vector fields for every model variant, the initial
// embedding map and the task decoders.
//
// All model functions are templates over the tensor type: Matrix evaluates
// eagerly, Var records onto a Tape for reverse-mode gradients. Both
// instantiations are compiled in vfield.cpp.

#include <functional>
#include <string>
#include <vector>

#include "gncde/autodiff.hpp"
#include "gncde/path.hpp"

namespace gncde {

enum class Variant { gncde_full, gncde_linear, gnode, neural_cde_plain, gncde_approx, gncde_direct };
enum class Activation { relu, sigmoid };
enum class Head { attributes, classify, link };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
Activation parse_activation(const std::string& s);
std::string to_string(Activation a);
Head parse_head(const std::string& s);
std::string to_string(Head h);

/// Shapes and switches of one model instance.
struct ModelSpec {
  Variant variant = Variant::gncde_approx;
  Activation activation = Activation::relu;
  Head head = Head::attributes;
  int n_nodes = 0;
  int embed_dim = 20;         // d (state width w for neural_cde_plain)
  int out_dim = 1;            // c: attributes per node or classes
  int layers = 1;             // L message-passing layers
  int feature_dim = 0;        // node features fed to the first layer (classify/link)
  int init_feature_dim = 0;   // node attributes at t0 fed to the initial embedding
  int hidden_dim = 0;         // decoder / plain-CDE MLP width; 0 means embed_dim
  int direct_cap = 20;        // largest n for the exact tensor-valued field
  double structural_scale = 1.0;  // gncde_full: weight on the interpolated adjacency

  void validate() const;
  int hidden() const { return hidden_dim > 0 ? hidden_dim : embed_dim; }
  /// True when the field contracts an explicit projection against dA/ds.
  bool uses_projection() const;
  /// True when the field fuses [A | dA] through W^DR.
  bool uses_fusion() const;
  /// Control dimension seen by neural_cde_plain (time + adjacency channels).
  int plain_path_dim() const;
};

/// Trainable tensors of a model. Absent tensors are empty (Matrix) or
/// invalid (Var). visit() walks present tensors in a fixed order, which is
/// the order used for flattening, initialisation and checkpoints.
template <class T>
struct Weights {
  std::vector<T> layers;  // layer 0: (d + feature_dim) x d, others d x d
  T fusion;               // W^DR, 2n x n
  T projection;           // W^BR, d*d x 2n*n
  T mixing;               // learned n x n propagation (linear variant)
  T init;                 // initial embedding map
  T dec_w1, dec_b1, dec_w2, dec_b2;
  T cde_w1, cde_b1, cde_w2, cde_b2;  // neural_cde_plain MLP

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    for (std::size_t l = 0; l < self.layers.size(); ++l) f("layer" + std::to_string(l), self.layers[l]);
    auto maybe = [&](const char* name, auto& t) {
      if (is_present(t)) f(std::string(name), t);
    };
    maybe("fusion", self.fusion);
    maybe("projection", self.projection);
    maybe("mixing", self.mixing);
    maybe("init", self.init);
    maybe("dec_w1", self.dec_w1);
    maybe("dec_b1", self.dec_b1);
    maybe("dec_w2", self.dec_w2);
    maybe("dec_b2", self.dec_b2);
    maybe("cde_w1", self.cde_w1);
    maybe("cde_b1", self.cde_b1);
    maybe("cde_w2", self.cde_w2);
    maybe("cde_b2", self.cde_b2);
  }
};

struct VectorFieldParams {
  ModelSpec spec;
  Weights<Matrix> weights;

  std::size_t size() const;
  Vector flatten() const;
  void unflatten(const Vector& flat);
  /// Throws ParameterError unless every tensor is finite and shaped for spec.
  void validate() const;
};

/// Glorot-uniform weights, zero biases, W^DR = [I; 0.1 I], mixing = I.
VectorFieldParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Copies every present tensor onto `tape` as a trainable leaf.
Weights<Var> to_tape(const Weights<Matrix>& w, Tape& tape);
/// Gradients of the taped weights, shaped like `w`.
Weights<Matrix> gradients(const Weights<Var>& w, const Tape& tape);

/// D^{-1/2}(A + I)D^{-1/2}. Negative entries are clamped to zero first
/// unless `allow_negative`; degrees are floored at 1.
SparseMatrix normalize_adjacency(const SparseMatrix& a, bool allow_negative = false);
Matrix normalize_adjacency(const Matrix& a, bool allow_negative = false);

/// Everything a field needs from the path at one stage of the solver.
struct StageInput {
  double s = 0.0;
  double dt_ds = 0.0;   // derivative of the time channel
  double clock = 1.0;   // d(physical time)/ds for time-driven fields
  bool path_held = false;  // past the last knot with the path held constant
  SparsePtr a_norm;     // normalised interpolated adjacency
  SparsePtr d_adj;      // raw dA/ds
  SparsePtr floor_norm; // normalised most recent snapshot
  Matrix control;       // contraction vector: 2n^2 (projection) or P (plain)
  Matrix features;      // n x feature_dim, empty when unused
};

/// Builds the inputs the variant in `spec` needs at path parameter s.
/// Past the end of the path the value/derivative follow `mode`.
StageInput make_stage_input(const ModelSpec& spec, const GraphPath& path, const FeaturePath* features,
                            double s, Side side, ExtrapolationMode mode);

/// Flattened time-augmented derivative, index ((p*n + q)*2 + c), c = 0 the
/// time channel and c = 1 the adjacency channel.
Matrix augmented_derivative_vector(double dt_ds, const SparseMatrix& d_adj);

// ---------------------------------------------------------------------------
// Model functions

template <class T>
T init_embedding(const ModelSpec& spec, const Weights<T>& w, double t0, const Matrix& a_t0,
                 const Matrix& f_t0);

/// dZ/ds for the variant in spec.
template <class T>
T field(const ModelSpec& spec, const Weights<T>& w, const StageInput& in, const T& z);

// Individual variants, exposed for testing. `field` dispatches to these.
template <class T>
T field_direct(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& a_norm, double dt_ds,
               const SparseMatrix& d_adj, const Matrix& features, const T& z);
template <class T>
T field_linear(const ModelSpec& spec, const Weights<T>& w, double dt_ds, const SparseMatrix& d_adj,
               const Matrix& features, const T& z);
template <class T>
T field_approx(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& a_norm, const SparsePtr& d_adj,
               const Matrix& features, const T& z);
template <class T>
T field_gnode(const ModelSpec& spec, const Weights<T>& w, const SparsePtr& floor_norm, double clock,
              const Matrix& features, const T& z);
template <class T>
T field_plain(const ModelSpec& spec, const Weights<T>& w, const Matrix& control, const T& z);
template <class T>
T field_full(const ModelSpec& spec, const Weights<T>& w, const StageInput& in, const T& z);

/// Attribute predictions (n x c) or class logits (n x c).
template <class T>
T decode(const ModelSpec& spec, const Weights<T>& w, const T& z);
/// Link logits (k x 1) for the ordered pairs (src[i], dst[i]).
template <class T>
T decode_links(const ModelSpec& spec, const Weights<T>& w, const T& z, const std::vector<int>& src,
               const std::vector<int>& dst);

}  // namespace gncde
