#include "gncde/path.hpp"

#include <algorithm>

namespace gncde {

Scheme parse_scheme(const std::string& s) {
  if (s == "linear") return Scheme::linear;
  if (s == "rectilinear") return Scheme::rectilinear;
  if (s == "natural_cubic") return Scheme::natural_cubic;
  if (s == "cubic_hermite") return Scheme::cubic_hermite;
  throw ParameterError("unknown interpolation scheme '" + s + "'");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::linear: return "linear";
    case Scheme::rectilinear: return "rectilinear";
    case Scheme::natural_cubic: return "natural_cubic";
    case Scheme::cubic_hermite: return "cubic_hermite";
  }
  return "?";
}

ExtrapolationMode parse_extrapolation_mode(const std::string& s) {
  if (s == "hold") return ExtrapolationMode::hold;
  if (s == "last_slope") return ExtrapolationMode::last_slope;
  throw ParameterError("unknown extrapolation mode '" + s + "'");
}

std::string to_string(ExtrapolationMode m) {
  return m == ExtrapolationMode::hold ? "hold" : "last_slope";
}

// ---------------------------------------------------------------------------
// PiecewiseCubic

namespace {

void check_breakpoints(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ParameterError("piecewise cubic: x/y length mismatch");
  if (xs.size() < 2) throw ParameterError("piecewise cubic: need at least two breakpoints");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw ParameterError("piecewise cubic: non-finite breakpoint data");
    if (i > 0 && !(xs[i] > xs[i - 1]))
      throw ParameterError("piecewise cubic: breakpoints must be strictly increasing");
  }
}

}  // namespace

PiecewiseCubic PiecewiseCubic::linear(std::vector<double> xs, std::vector<double> ys) {
  check_breakpoints(xs, ys);
  PiecewiseCubic p;
  const std::size_t m = xs.size() - 1;
  p.pieces_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double h = xs[j + 1] - xs[j];
    p.pieces_[j] = {ys[j], (ys[j + 1] - ys[j]) / h, 0.0, 0.0};
  }
  p.xs_ = std::move(xs);
  p.ys_ = std::move(ys);
  return p;
}

PiecewiseCubic PiecewiseCubic::natural_cubic(std::vector<double> xs, std::vector<double> ys) {
  check_breakpoints(xs, ys);
  const std::size_t m = xs.size() - 1;
  std::vector<double> h(m);
  for (std::size_t j = 0; j < m; ++j) h[j] = xs[j + 1] - xs[j];

  // Second derivatives M_0..M_m with M_0 = M_m = 0; tridiagonal system for
  // the interior values, solved by the Thomas algorithm.
  std::vector<double> second(m + 1, 0.0);
  if (m >= 2) {
    const std::size_t k = m - 1;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + 1;
      diag[i] = 2.0 * (h[j - 1] + h[j]);
      upper[i] = h[j];
      rhs[i] = 6.0 * ((ys[j + 1] - ys[j]) / h[j] - (ys[j] - ys[j - 1]) / h[j - 1]);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = h[i] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    second[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
  }

  PiecewiseCubic p;
  p.pieces_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double slope = (ys[j + 1] - ys[j]) / h[j];
    p.pieces_[j] = {ys[j], slope - h[j] * (2.0 * second[j] + second[j + 1]) / 6.0,
                    second[j] / 2.0, (second[j + 1] - second[j]) / (6.0 * h[j])};
  }
  p.xs_ = std::move(xs);
  p.ys_ = std::move(ys);
  return p;
}

PiecewiseCubic PiecewiseCubic::hermite_backward(std::vector<double> xs, std::vector<double> ys) {
  check_breakpoints(xs, ys);
  const std::size_t m = xs.size() - 1;
  std::vector<double> slope(m + 1);
  slope[0] = ys[1] - ys[0];
  for (std::size_t k = 1; k <= m; ++k) slope[k] = ys[k] - ys[k - 1];

  PiecewiseCubic p;
  p.pieces_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double h = xs[j + 1] - xs[j];
    const double secant = (ys[j + 1] - ys[j]) / h;
    p.pieces_[j] = {ys[j], slope[j], (3.0 * secant - 2.0 * slope[j] - slope[j + 1]) / h,
                    (slope[j] + slope[j + 1] - 2.0 * secant) / (h * h)};
  }
  p.xs_ = std::move(xs);
  p.ys_ = std::move(ys);
  return p;
}

PiecewiseCubic PiecewiseCubic::constant(double x0, double x1, double y) {
  return linear({x0, x1}, {y, y});
}

std::size_t PiecewiseCubic::interval(double x, Side side) const {
  const auto it = side == Side::right ? std::upper_bound(xs_.begin(), xs_.end(), x)
                                      : std::lower_bound(xs_.begin(), xs_.end(), x);
  const auto idx = static_cast<std::ptrdiff_t>(it - xs_.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(pieces_.size()) - 1));
}

double PiecewiseCubic::value(double x) const {
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  const std::size_t j = interval(x);
  if (x == xs_[j]) return ys_[j];
  const Piece& p = pieces_[j];
  const double u = x - xs_[j];
  return p.a + u * (p.b + u * (p.c + u * p.d));
}

double PiecewiseCubic::derivative(double x, Side side) const {
  if (x < xs_.front() || x > xs_.back()) return 0.0;
  const std::size_t j = interval(x, side);
  const Piece& p = pieces_[j];
  const double u = x - xs_[j];
  return p.b + u * (2.0 * p.c + u * 3.0 * p.d);
}

double PiecewiseCubic::second_derivative(double x, Side side) const {
  if (x < xs_.front() || x > xs_.back()) return 0.0;
  const std::size_t j = interval(x, side);
  const Piece& p = pieces_[j];
  const double u = x - xs_[j];
  return 2.0 * p.c + 6.0 * p.d * u;
}

// ---------------------------------------------------------------------------
// GraphPath construction

namespace {

PiecewiseCubic curve_for(Scheme scheme, const std::vector<double>& xs, const std::vector<double>& ys) {
  switch (scheme) {
    case Scheme::linear: return PiecewiseCubic::linear(xs, ys);
    case Scheme::natural_cubic: return PiecewiseCubic::natural_cubic(xs, ys);
    case Scheme::cubic_hermite: return PiecewiseCubic::hermite_backward(xs, ys);
    case Scheme::rectilinear: break;
  }
  throw ParameterError("curve_for: rectilinear handled separately");
}

// Lag channel on the lead-lag grid: value y_j holds from knot k_j until the
// half step before the next observed knot, then moves to y_{j+1}.
PiecewiseCubic rectilinear_lag(const std::vector<std::size_t>& knots, const std::vector<double>& ys) {
  std::vector<double> px{2.0 * static_cast<double>(knots[0])};
  std::vector<double> py{ys[0]};
  for (std::size_t j = 1; j < knots.size(); ++j) {
    px.push_back(2.0 * static_cast<double>(knots[j]) - 1.0);
    py.push_back(ys[j - 1]);
    px.push_back(2.0 * static_cast<double>(knots[j]));
    py.push_back(ys[j]);
  }
  return PiecewiseCubic::linear(std::move(px), std::move(py));
}

// Lead channel: the time coordinate advances first, on [2k, 2k+1].
PiecewiseCubic rectilinear_lead(const std::vector<double>& times) {
  std::vector<double> px{0.0};
  std::vector<double> py{times[0]};
  for (std::size_t k = 1; k < times.size(); ++k) {
    px.push_back(2.0 * static_cast<double>(k) - 1.0);
    py.push_back(times[k]);
    px.push_back(2.0 * static_cast<double>(k));
    py.push_back(times[k]);
  }
  return PiecewiseCubic::linear(std::move(px), std::move(py));
}

}  // namespace

GraphPath build_path(const DynamicGraphObservations& obs, Scheme scheme) {
  if (obs.size() < 2) throw ParameterError("build_path: need at least two snapshots");
  obs.validate();

  GraphPath path;
  path.scheme_ = scheme;
  path.n_ = obs.n_nodes();
  path.knot_times_ = obs.times();
  const std::size_t count = obs.size();
  const int n = path.n_;

  if (scheme == Scheme::rectilinear) {
    for (std::size_t k = 0; k < count; ++k) path.knot_params_.push_back(2.0 * static_cast<double>(k));
    path.time_channel_ = rectilinear_lead(path.knot_times_);
  } else {
    path.knot_params_ = path.knot_times_;
    path.time_channel_ = curve_for(scheme, path.knot_params_, path.knot_times_);
  }

  std::vector<Eigen::Triplet<double>> constants;
  std::vector<std::vector<Eigen::Triplet<double>>> floor_triplets(count);
  std::vector<std::size_t> knots;
  std::vector<double> xs, ys;
  knots.reserve(count);
  xs.reserve(count);
  ys.reserve(count);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      knots.clear();
      ys.clear();
      for (std::size_t k = 0; k < count; ++k) {
        if (obs.channel_observed(k, i, j)) {
          knots.push_back(k);
          ys.push_back(obs.snapshots[k].topology.adjacency(i, j));
        }
      }
      if (knots.size() < 2) {
        throw ParameterError("build_path: channel (" + std::to_string(i) + "," + std::to_string(j) +
                             ") has fewer than two observations");
      }

      // Floor values: carry each observation forward, back-fill before the first.
      std::size_t next = 0;
      double held = ys[0];
      for (std::size_t k = 0; k < count; ++k) {
        if (next < knots.size() && knots[next] == k) held = ys[next++];
        if (held != 0.0) floor_triplets[k].emplace_back(i, j, held);
      }

      const bool is_constant = std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys[0]; });
      if (is_constant) {
        if (ys[0] != 0.0) constants.emplace_back(i, j, ys[0]);
        continue;
      }
      if (scheme == Scheme::rectilinear) {
        path.varying_.push_back({i, j, rectilinear_lag(knots, ys)});
      } else {
        xs.clear();
        for (std::size_t k : knots) xs.push_back(path.knot_params_[k]);
        path.varying_.push_back({i, j, curve_for(scheme, xs, ys)});
      }
    }
  }

  path.constant_part_ = SparseMatrix(n, n);
  path.constant_part_.setFromTriplets(constants.begin(), constants.end());
  path.floor_.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    path.floor_[k] = SparseMatrix(n, n);
    path.floor_[k].setFromTriplets(floor_triplets[k].begin(), floor_triplets[k].end());
  }
  return path;
}

// ---------------------------------------------------------------------------
// GraphPath evaluation

void GraphPath::check_domain(double s) const {
  if (!(s >= param_begin() && s <= param_end())) {
    throw RangeError("path evaluated at " + std::to_string(s) + " outside [" +
                     std::to_string(param_begin()) + ", " + std::to_string(param_end()) + "]");
  }
}

double GraphPath::param_of_time(double t) const {
  if (scheme_ != Scheme::rectilinear) return t;
  const auto& ts = knot_times_;
  if (t < ts.front()) throw RangeError("time " + std::to_string(t) + " precedes the first knot");
  const std::size_t last = ts.size() - 1;
  if (t >= ts.back()) {
    return 2.0 * static_cast<double>(last) + (t - ts[last]) / (ts[last] - ts[last - 1]);
  }
  const auto k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
  return 2.0 * static_cast<double>(k) + (t - ts[k]) / (ts[k + 1] - ts[k]);
}

double GraphPath::time_of_param(double s) const {
  if (scheme_ != Scheme::rectilinear) return s;
  if (s > param_end()) {
    const std::size_t last = knot_times_.size() - 1;
    return knot_times_[last] + (s - param_end()) * (knot_times_[last] - knot_times_[last - 1]);
  }
  check_domain(s);
  return time_channel_.value(s);
}

SparsePathValue GraphPath::value_at(double s) const {
  SparsePathValue v;
  v.time = time_channel_.value(s);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(constant_part_.nonZeros()) + varying_.size());
  for (int c = 0; c < constant_part_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(constant_part_, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (const auto& ch : varying_) trip.emplace_back(ch.row, ch.col, ch.curve.value(s));
  v.adjacency = SparseMatrix(n_, n_);
  v.adjacency.setFromTriplets(trip.begin(), trip.end());
  return v;
}

SparsePathDerivative GraphPath::derivative_at(double s, Side side) const {
  SparsePathDerivative d;
  d.d_time = time_channel_.derivative(s, side);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(varying_.size());
  for (const auto& ch : varying_) {
    const double v = ch.curve.derivative(s, side);
    if (v != 0.0) trip.emplace_back(ch.row, ch.col, v);
  }
  d.d_adjacency = SparseMatrix(n_, n_);
  d.d_adjacency.setFromTriplets(trip.begin(), trip.end());
  return d;
}

SparsePathValue GraphPath::eval_sparse(double s) const {
  check_domain(s);
  return value_at(s);
}

SparsePathDerivative GraphPath::eval_derivative_sparse(double s, Side side) const {
  check_domain(s);
  return derivative_at(s, side);
}

PathValue GraphPath::eval(double s) const {
  const SparsePathValue v = eval_sparse(s);
  return {v.time, Matrix(v.adjacency)};
}

PathDerivative GraphPath::eval_derivative(double s, Side side) const {
  const SparsePathDerivative d = eval_derivative_sparse(s, side);
  return {d.d_time, Matrix(d.d_adjacency)};
}

PathDerivative GraphPath::eval_second_derivative(double s, Side side) const {
  check_domain(s);
  PathDerivative d;
  d.d_time = time_channel_.second_derivative(s, side);
  d.d_adjacency = Matrix::Zero(n_, n_);
  for (const auto& ch : varying_) d.d_adjacency(ch.row, ch.col) = ch.curve.second_derivative(s, side);
  return d;
}

SparsePathValue GraphPath::eval_extended(double s, ExtrapolationMode mode) const {
  if (s <= param_end()) return eval_sparse(s);
  SparsePathValue v = value_at(param_end());
  if (mode == ExtrapolationMode::last_slope) {
    const SparsePathDerivative d = derivative_at(param_end(), Side::left);
    const double ds = s - param_end();
    v.time += ds * d.d_time;
    v.adjacency += ds * d.d_adjacency;
  }
  return v;
}

SparsePathDerivative GraphPath::eval_derivative_extended(double s, ExtrapolationMode mode, Side side) const {
  if (s < param_end() || (s == param_end() && side == Side::left)) return eval_derivative_sparse(s, side);
  if (mode == ExtrapolationMode::last_slope) return derivative_at(param_end(), Side::left);
  return {0.0, SparseMatrix(n_, n_)};
}

const SparseMatrix& GraphPath::floor_adjacency(double t, Side side) const {
  const auto it = side == Side::right ? std::upper_bound(knot_times_.begin(), knot_times_.end(), t)
                                      : std::lower_bound(knot_times_.begin(), knot_times_.end(), t);
  const std::size_t k = it == knot_times_.begin() ? 0 : static_cast<std::size_t>(it - knot_times_.begin()) - 1;
  return floor_[k];
}

// ---------------------------------------------------------------------------
// Masks

DynamicGraphObservations mask_missing(const DynamicGraphObservations& obs,
                                      const std::vector<std::vector<bool>>& missing) {
  DynamicGraphObservations out = obs;
  if (missing.empty()) {
    out.missing.clear();
    return out;
  }
  const int n = obs.n_nodes();
  const auto channels = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  if (missing.size() != obs.size()) throw ParameterError("mask_missing: one mask per snapshot required");
  for (const auto& m : missing)
    if (m.size() != channels) throw ParameterError("mask_missing: mask must have n*n entries");
  for (std::size_t c = 0; c < channels; ++c) {
    std::size_t observed = 0;
    for (std::size_t k = 0; k < obs.size(); ++k) observed += missing[k][c] ? 0 : 1;
    if (observed < 2) {
      throw ParameterError("mask_missing: channel (" + std::to_string(c / n) + "," +
                           std::to_string(c % n) + ") keeps fewer than two observations");
    }
  }
  out.missing = missing;
  return out;
}

std::vector<std::vector<bool>> random_channel_mask(int n_nodes, std::size_t snapshots, double fraction,
                                                   std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw ParameterError("random_channel_mask: fraction must be in [0,1)");
  if (snapshots < 2) throw ParameterError("random_channel_mask: need at least two snapshots");
  const auto n = static_cast<std::size_t>(n_nodes);
  std::vector<std::vector<bool>> mask(snapshots, std::vector<bool>(n * n, false));
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      std::size_t observed = 0;
      for (std::size_t k = 0; k < snapshots; ++k) {
        const bool drop = rng.bernoulli(fraction);
        mask[k][i * n + j] = drop;
        mask[k][j * n + i] = drop;
        observed += drop ? 0 : 1;
      }
      // Restore the earliest dropped knots until two observations remain.
      for (std::size_t k = 0; k < snapshots && observed < 2; ++k) {
        if (mask[k][i * n + j]) {
          mask[k][i * n + j] = false;
          mask[k][j * n + i] = false;
          ++observed;
        }
      }
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// FeaturePath

FeaturePath::FeaturePath(const std::vector<double>& times, const std::vector<Matrix>& values) {
  if (times.size() != values.size() || times.size() < 2)
    throw ParameterError("FeaturePath: need at least two aligned knots");
  rows_ = static_cast<int>(values.front().rows());
  cols_ = static_cast<int>(values.front().cols());
  t_end_ = times.back();
  std::vector<double> ys(times.size());
  channels_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (int c = 0; c < cols_; ++c) {
    for (int r = 0; r < rows_; ++r) {
      for (std::size_t k = 0; k < times.size(); ++k) ys[k] = values[k](r, c);
      channels_.push_back(PiecewiseCubic::natural_cubic(times, ys));
    }
  }
}

Matrix FeaturePath::eval(double t, ExtrapolationMode mode) const {
  Matrix out(rows_, cols_);
  const bool extend = mode == ExtrapolationMode::last_slope && t > t_end_;
  for (int c = 0; c < cols_; ++c) {
    for (int r = 0; r < rows_; ++r) {
      const auto& ch = channels_[static_cast<std::size_t>(c) * rows_ + r];
      out(r, c) = extend ? ch.value(t_end_) + (t - t_end_) * ch.derivative(t_end_) : ch.value(t);
    }
  }
  return out;
}

}  // namespace gncde
