#pragma once

// Reverse-mode differentiation over matrix-valued operations.
//
// A Tape records every operation applied to Var handles in creation order;
// backward() replays the recorded closures in reverse, so each node is
// visited once after all of its consumers. Every op also has an eager
// overload on plain Matrix with the same name, which lets model code be
// written once as a template over the tensor type.

#include <functional>
#include <memory>
#include <vector>

#include "gncde/common.hpp"

namespace gncde {

using SparsePtr = std::shared_ptr<const SparseMatrix>;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is wanted (a trainable parameter).
  Var variable(Matrix value);
  /// Leaf treated as a constant.
  Var constant(Matrix value);

  /// Seeds d(output)/d(output) = 1 for a 1x1 output and propagates.
  void backward(const Var& output);
  /// Accumulated gradient; zeros shaped like the value if none reached it.
  Matrix grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

  // Op-building interface used by the free functions below.
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Var push(Matrix value, bool requires_grad, std::function<void()> backward);
  /// Gradient slot of a node, zero-initialised on first use.
  Matrix& grad_slot(std::size_t id);
  const Matrix& pending_grad(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Recorded ops

Var matmul(const Var& a, const Var& b);
Var matmul(const Var& a, const Matrix& b);
Var matmul(const Matrix& a, const Var& b);
Var matmul(const SparsePtr& a, const Var& b);
Var add(const Var& a, const Var& b);
Var add(const Var& a, const Matrix& b);
Var sub(const Var& a, const Var& b);
Var sub(const Var& a, const Matrix& b);
Var scale(const Var& a, double s);
/// sum_i coeffs[i] * xs[i]; all operands share one shape.
Var lincomb(const std::vector<double>& coeffs, const std::vector<Var>& xs);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
/// Adds the 1 x c row `b` to every row of `a`.
Var add_row_bias(const Var& a, const Var& b);
/// Column-major reshape.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var rows_block(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, const std::vector<int>& rows);
Var hconcat(const Var& a, const Var& b);
Var hconcat(const Var& a, const Matrix& b);
Var sum(const Var& a);
/// Mean of squared differences over all entries (1x1).
Var mse(const Var& pred, const Matrix& target);
/// Mean absolute difference over all entries (1x1); subgradient 0 at ties.
Var l1(const Var& pred, const Matrix& target);
/// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);
/// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets.
Var bce_with_logits(const Var& logits, const Matrix& targets);

// ---------------------------------------------------------------------------
// Eager counterparts

inline Matrix matmul(const Matrix& a, const Matrix& b) { return a * b; }
inline Matrix matmul(const SparsePtr& a, const Matrix& b) { return (*a) * b; }
inline Matrix add(const Matrix& a, const Matrix& b) { return a + b; }
inline Matrix sub(const Matrix& a, const Matrix& b) { return a - b; }
inline Matrix scale(const Matrix& a, double s) { return s * a; }
Matrix lincomb(const std::vector<double>& coeffs, const std::vector<Matrix>& xs);
inline Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }
inline Matrix sigmoid(const Matrix& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }
inline Matrix tanh(const Matrix& a) { return a.array().tanh().matrix(); }
inline Matrix add_row_bias(const Matrix& a, const Matrix& b) { return a.rowwise() + b.row(0); }
inline Matrix reshape(const Matrix& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.size()) throw ParameterError("reshape: element count mismatch");
  return Eigen::Map<const Matrix>(a.data(), rows, cols);
}
inline Matrix rows_block(const Matrix& a, Eigen::Index start, Eigen::Index count) {
  return a.middleRows(start, count);
}
Matrix gather_rows(const Matrix& a, const std::vector<int>& rows);
Matrix hconcat(const Matrix& a, const Matrix& b);
inline Matrix sum(const Matrix& a) { return Matrix::Constant(1, 1, a.sum()); }
Matrix mse(const Matrix& pred, const Matrix& target);
Matrix l1(const Matrix& pred, const Matrix& target);
Matrix softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);
Matrix bce_with_logits(const Matrix& logits, const Matrix& targets);

/// Row-wise softmax (each row sums to 1).
Matrix softmax_rows(const Matrix& logits);

inline const Matrix& value_of(const Matrix& m) { return m; }
inline const Matrix& value_of(const Var& v) { return v.value(); }
inline bool is_present(const Matrix& m) { return m.size() > 0; }
inline bool is_present(const Var& v) { return v.valid(); }

}  // namespace gncde
