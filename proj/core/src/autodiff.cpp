#include "gncde/autodiff.hpp"

#include <cmath>

namespace gncde {

// ---------------------------------------------------------------------------
// Tape

Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::push(Matrix value, bool requires_grad, std::function<void()> backward) {
  nodes_.push_back({std::move(value), Matrix(), requires_grad, requires_grad ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& output) {
  if (output.tape() != this) throw ParameterError("Tape::backward: output belongs to another tape");
  if (output.value().size() != 1) throw ParameterError("Tape::backward: output must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_slot(output.id())(0, 0) = 1.0;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() > 0) n.backward();
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---------------------------------------------------------------------------
// Recorded ops

namespace {

Tape* common_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw ParameterError("autodiff: operand is not on a tape");
  if (a.tape() != b.tape()) throw ParameterError("autodiff: operands live on different tapes");
  return a.tape();
}

Tape* tape_of(const Var& a) {
  if (!a.valid()) throw ParameterError("autodiff: operand is not on a tape");
  return a.tape();
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ParameterError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

void check_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ParameterError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  check_matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id(), out = t->size();
  const bool rg = t->requires_grad(ia) || t->requires_grad(ib);
  return t->push(a.value() * b.value(), rg, [t, ia, ib, out] {
    const Matrix& g = t->pending_grad(out);
    if (t->requires_grad(ia)) t->grad_slot(ia).noalias() += g * t->value(ib).transpose();
    if (t->requires_grad(ib)) t->grad_slot(ib).noalias() += t->value(ia).transpose() * g;
  });
}

Var matmul(const Var& a, const Matrix& b) { return matmul(a, tape_of(a)->constant(b)); }

Var matmul(const Matrix& a, const Var& b) { return matmul(tape_of(b)->constant(a), b); }

Var matmul(const SparsePtr& a, const Var& b) {
  Tape* t = tape_of(b);
  if (a->cols() != b.rows()) throw ParameterError("matmul: sparse inner dimensions differ");
  const std::size_t ib = b.id(), out = t->size();
  return t->push((*a) * b.value(), t->requires_grad(ib), [t, a, ib, out] {
    t->grad_slot(ib).noalias() += a->transpose() * t->pending_grad(out);
  });
}

Var add(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id(), out = t->size();
  const bool rg = t->requires_grad(ia) || t->requires_grad(ib);
  return t->push(a.value() + b.value(), rg, [t, ia, ib, out] {
    const Matrix& g = t->pending_grad(out);
    if (t->requires_grad(ia)) t->grad_slot(ia) += g;
    if (t->requires_grad(ib)) t->grad_slot(ib) += g;
  });
}

Var add(const Var& a, const Matrix& b) { return add(a, tape_of(a)->constant(b)); }

Var sub(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id(), out = t->size();
  const bool rg = t->requires_grad(ia) || t->requires_grad(ib);
  return t->push(a.value() - b.value(), rg, [t, ia, ib, out] {
    const Matrix& g = t->pending_grad(out);
    if (t->requires_grad(ia)) t->grad_slot(ia) += g;
    if (t->requires_grad(ib)) t->grad_slot(ib) -= g;
  });
}

Var sub(const Var& a, const Matrix& b) { return sub(a, tape_of(a)->constant(b)); }

Var scale(const Var& a, double s) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  return t->push(s * a.value(), t->requires_grad(ia), [t, ia, out, s] {
    t->grad_slot(ia) += s * t->pending_grad(out);
  });
}

Var lincomb(const std::vector<double>& coeffs, const std::vector<Var>& xs) {
  if (coeffs.size() != xs.size() || xs.empty()) throw ParameterError("lincomb: need matching, non-empty operands");
  Tape* t = tape_of(xs[0]);
  Matrix value = coeffs[0] * xs[0].value();
  bool rg = t->requires_grad(xs[0].id());
  std::vector<std::size_t> ids{xs[0].id()};
  for (std::size_t i = 1; i < xs.size(); ++i) {
    common_tape(xs[0], xs[i]);
    check_same_shape(value, xs[i].value(), "lincomb");
    value += coeffs[i] * xs[i].value();
    rg = rg || t->requires_grad(xs[i].id());
    ids.push_back(xs[i].id());
  }
  const std::size_t out = t->size();
  return t->push(std::move(value), rg, [t, ids, coeffs, out] {
    const Matrix& g = t->pending_grad(out);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (coeffs[i] != 0.0 && t->requires_grad(ids[i])) t->grad_slot(ids[i]) += coeffs[i] * g;
  });
}

Var relu(const Var& a) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  return t->push(a.value().cwiseMax(0.0), t->requires_grad(ia), [t, ia, out] {
    t->grad_slot(ia).array() += (t->value(ia).array() > 0.0).select(t->pending_grad(out).array(), 0.0);
  });
}

Var sigmoid(const Var& a) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  return t->push(gncde::sigmoid(a.value()), t->requires_grad(ia), [t, ia, out] {
    const auto y = t->value(out).array();
    t->grad_slot(ia).array() += t->pending_grad(out).array() * y * (1.0 - y);
  });
}

Var tanh(const Var& a) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  return t->push(a.value().array().tanh().matrix(), t->requires_grad(ia), [t, ia, out] {
    const auto y = t->value(out).array();
    t->grad_slot(ia).array() += t->pending_grad(out).array() * (1.0 - y * y);
  });
}

Var add_row_bias(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) throw ParameterError("add_row_bias: bias must be 1 x cols");
  const std::size_t ia = a.id(), ib = b.id(), out = t->size();
  const bool rg = t->requires_grad(ia) || t->requires_grad(ib);
  return t->push(a.value().rowwise() + b.value().row(0), rg, [t, ia, ib, out] {
    const Matrix& g = t->pending_grad(out);
    if (t->requires_grad(ia)) t->grad_slot(ia) += g;
    if (t->requires_grad(ib)) t->grad_slot(ib) += g.colwise().sum();
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return t->push(gncde::reshape(a.value(), rows, cols), t->requires_grad(ia), [t, ia, out, r0, c0] {
    const Matrix& g = t->pending_grad(out);
    t->grad_slot(ia) += Eigen::Map<const Matrix>(g.data(), r0, c0);
  });
}

Var rows_block(const Var& a, Eigen::Index start, Eigen::Index count) {
  Tape* t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.rows()) throw ParameterError("rows_block: range out of bounds");
  const std::size_t ia = a.id(), out = t->size();
  return t->push(a.value().middleRows(start, count), t->requires_grad(ia), [t, ia, out, start, count] {
    t->grad_slot(ia).middleRows(start, count) += t->pending_grad(out);
  });
}

Var gather_rows(const Var& a, const std::vector<int>& rows) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  return t->push(gncde::gather_rows(a.value(), rows), t->requires_grad(ia), [t, ia, out, rows] {
    const Matrix& g = t->pending_grad(out);
    Matrix& ga = t->grad_slot(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var hconcat(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id(), out = t->size();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  const bool rg = t->requires_grad(ia) || t->requires_grad(ib);
  return t->push(gncde::hconcat(a.value(), b.value()), rg, [t, ia, ib, out, ca, cb] {
    const Matrix& g = t->pending_grad(out);
    if (t->requires_grad(ia)) t->grad_slot(ia) += g.leftCols(ca);
    if (t->requires_grad(ib)) t->grad_slot(ib) += g.rightCols(cb);
  });
}

Var hconcat(const Var& a, const Matrix& b) { return hconcat(a, tape_of(a)->constant(b)); }

Var sum(const Var& a) {
  Tape* t = tape_of(a);
  const std::size_t ia = a.id(), out = t->size();
  return t->push(gncde::sum(a.value()), t->requires_grad(ia), [t, ia, out] {
    t->grad_slot(ia).array() += t->pending_grad(out)(0, 0);
  });
}

Var mse(const Var& pred, const Matrix& target) {
  Tape* t = tape_of(pred);
  check_same_shape(pred.value(), target, "mse");
  const std::size_t ip = pred.id(), out = t->size();
  return t->push(gncde::mse(pred.value(), target), t->requires_grad(ip), [t, ip, out, target] {
    const double scale = 2.0 * t->pending_grad(out)(0, 0) / static_cast<double>(target.size());
    t->grad_slot(ip) += scale * (t->value(ip) - target);
  });
}

Var l1(const Var& pred, const Matrix& target) {
  Tape* t = tape_of(pred);
  check_same_shape(pred.value(), target, "l1");
  const std::size_t ip = pred.id(), out = t->size();
  return t->push(gncde::l1(pred.value(), target), t->requires_grad(ip), [t, ip, out, target] {
    const double scale = t->pending_grad(out)(0, 0) / static_cast<double>(target.size());
    t->grad_slot(ip).array() += scale * (t->value(ip) - target).array().sign();
  });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  Tape* t = tape_of(logits);
  const std::size_t il = logits.id(), out = t->size();
  return t->push(gncde::softmax_cross_entropy(logits.value(), labels), t->requires_grad(il),
                 [t, il, out, labels] {
                   Matrix g = softmax_rows(t->value(il));
                   for (std::size_t r = 0; r < labels.size(); ++r) g(static_cast<Eigen::Index>(r), labels[r]) -= 1.0;
                   t->grad_slot(il) += (t->pending_grad(out)(0, 0) / static_cast<double>(labels.size())) * g;
                 });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  Tape* t = tape_of(logits);
  check_same_shape(logits.value(), targets, "bce_with_logits");
  const std::size_t il = logits.id(), out = t->size();
  return t->push(gncde::bce_with_logits(logits.value(), targets), t->requires_grad(il), [t, il, out, targets] {
    const double scale = t->pending_grad(out)(0, 0) / static_cast<double>(targets.size());
    t->grad_slot(il) += scale * (gncde::sigmoid(t->value(il)) - targets);
  });
}

// ---------------------------------------------------------------------------
// Eager ops

Matrix lincomb(const std::vector<double>& coeffs, const std::vector<Matrix>& xs) {
  if (coeffs.size() != xs.size() || xs.empty()) throw ParameterError("lincomb: need matching, non-empty operands");
  Matrix out = coeffs[0] * xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    check_same_shape(out, xs[i], "lincomb");
    out += coeffs[i] * xs[i];
  }
  return out;
}

Matrix gather_rows(const Matrix& a, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) throw ParameterError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.row(rows[r]);
  }
  return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ParameterError("hconcat: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Matrix mse(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "mse");
  return Matrix::Constant(1, 1, (pred - target).squaredNorm() / static_cast<double>(pred.size()));
}

Matrix l1(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "l1");
  return Matrix::Constant(1, 1, (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size()));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  const Vector norms = out.rowwise().sum();
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) /= norms(r);
  return out;
}

Matrix softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw ParameterError("softmax_cross_entropy: one label per row required");
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= logits.cols()) throw ParameterError("softmax_cross_entropy: label out of range");
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, label);
  }
  return Matrix::Constant(1, 1, total / static_cast<double>(logits.rows()));
}

Matrix bce_with_logits(const Matrix& logits, const Matrix& targets) {
  check_same_shape(logits, targets, "bce_with_logits");
  const auto x = logits.array();
  const auto y = targets.array();
  const double total = (x.max(0.0) - x * y + (1.0 + (-x.abs()).exp()).log()).sum();
  return Matrix::Constant(1, 1, total / static_cast<double>(logits.size()));
}

}  // namespace gncde
