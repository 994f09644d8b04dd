#pragma once

// Continuous control paths built from irregular adjacency snapshots.
//
// Every adjacency entry (i, j) is an independent channel; channel 0 of the
// time-augmented path carries the timestamps themselves. All four schemes
// are stored as piecewise cubics over breakpoints in the path parameter s,
// which equals physical time except for the rectilinear (lead-lag) scheme,
// whose parameter runs over [0, 2N].

#include <cstdint>
#include <string>
#include <vector>

#include "gncde/common.hpp"
#include "gncde/dyngraph.hpp"

namespace gncde {

enum class Scheme { linear, rectilinear, natural_cubic, cubic_hermite };
enum class ExtrapolationMode { hold, last_slope };

Scheme parse_scheme(const std::string& s);
std::string to_string(Scheme s);
ExtrapolationMode parse_extrapolation_mode(const std::string& s);
std::string to_string(ExtrapolationMode m);

enum class Side { left, right };

/// Scalar piecewise cubic p_j(u) = a + b u + c u^2 + d u^3, u = x - x_j.
/// Outside [x_0, x_M] the curve holds its end value with zero slope.
class PiecewiseCubic {
 public:
  PiecewiseCubic() = default;

  static PiecewiseCubic linear(std::vector<double> xs, std::vector<double> ys);
  static PiecewiseCubic natural_cubic(std::vector<double> xs, std::vector<double> ys);
  /// Knot slopes are raw backward differences y_k - y_{k-1}; the first knot
  /// reuses y_1 - y_0.
  static PiecewiseCubic hermite_backward(std::vector<double> xs, std::vector<double> ys);
  static PiecewiseCubic constant(double x0, double x1, double y);

  double value(double x) const;
  /// Right-hand derivative by default; at the last breakpoint always left-hand.
  double derivative(double x, Side side = Side::right) const;
  double second_derivative(double x, Side side = Side::right) const;

  double front() const { return xs_.front(); }
  double back() const { return xs_.back(); }
  const std::vector<double>& breakpoints() const { return xs_; }
  const std::vector<double>& values() const { return ys_; }

 private:
  struct Piece {
    double a, b, c, d;
  };
  std::size_t interval(double x, Side side = Side::right) const;

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<Piece> pieces_;
};

struct PathValue {
  double time = 0.0;
  Matrix adjacency;
};

struct PathDerivative {
  double d_time = 0.0;
  Matrix d_adjacency;
};

/// Sparse counterparts used on the hot path of the vector fields.
struct SparsePathValue {
  double time = 0.0;
  SparseMatrix adjacency;
};
struct SparsePathDerivative {
  double d_time = 0.0;
  SparseMatrix d_adjacency;
};

class GraphPath {
 public:
  Scheme scheme() const { return scheme_; }
  int n_nodes() const { return n_; }
  std::size_t knot_count() const { return knot_times_.size(); }
  const std::vector<double>& knot_times() const { return knot_times_; }
  /// Knot locations in the path parameter (2k for rectilinear).
  const std::vector<double>& knot_params() const { return knot_params_; }
  double param_begin() const { return knot_params_.front(); }
  double param_end() const { return knot_params_.back(); }
  /// Number of channels that vary between knots (the rest are stored once).
  std::size_t varying_channels() const { return varying_.size(); }

  /// Physical time -> path parameter. Times past the last knot continue
  /// with the final interval's rate (rectilinear) or the identity.
  double param_of_time(double t) const;
  double time_of_param(double s) const;

  /// Strict evaluation on [param_begin, param_end]; throws RangeError outside.
  PathValue eval(double s) const;
  /// Right-hand derivative at knots (left-hand at the end) unless `side`
  /// asks for the left limit.
  PathDerivative eval_derivative(double s, Side side = Side::right) const;
  PathDerivative eval_second_derivative(double s, Side side) const;

  SparsePathValue eval_sparse(double s) const;
  SparsePathDerivative eval_derivative_sparse(double s, Side side = Side::right) const;

  /// As above, but past param_end the path is held (zero derivative) or
  /// continued along its final slope, per `mode`.
  SparsePathValue eval_extended(double s, ExtrapolationMode mode) const;
  SparsePathDerivative eval_derivative_extended(double s, ExtrapolationMode mode,
                                                Side side = Side::right) const;

  /// Most recent observed adjacency at or before physical time t
  /// (piecewise-constant, no interpolation). Unobserved channels carry their
  /// last observation forward. With Side::left a knot time resolves to the
  /// snapshot before it.
  const SparseMatrix& floor_adjacency(double t, Side side = Side::right) const;

  friend GraphPath build_path(const DynamicGraphObservations& obs, Scheme scheme);

 private:
  struct Channel {
    int row;
    int col;
    PiecewiseCubic curve;
  };
  void check_domain(double s) const;
  SparsePathValue value_at(double s) const;
  SparsePathDerivative derivative_at(double s, Side side) const;

  Scheme scheme_ = Scheme::natural_cubic;
  int n_ = 0;
  std::vector<double> knot_times_;
  std::vector<double> knot_params_;
  PiecewiseCubic time_channel_;
  SparseMatrix constant_part_;
  std::vector<Channel> varying_;
  std::vector<SparseMatrix> floor_;
};

/// Requires >= 2 snapshots with strictly increasing times and, when a mask is
/// present, >= 2 observed knots per channel.
GraphPath build_path(const DynamicGraphObservations& obs, Scheme scheme);

/// Attach a per-snapshot, per-channel missing mask (row-major n*n, true =
/// missing). Each channel must keep at least two observations.
DynamicGraphObservations mask_missing(const DynamicGraphObservations& obs,
                                      const std::vector<std::vector<bool>>& missing);

/// Independent Bernoulli(fraction) mask per snapshot and unordered node pair;
/// (i,j) and (j,i) share a flag so interpolated adjacency stays symmetric.
/// Pairs that would fall below two observations are restored.
std::vector<std::vector<bool>> random_channel_mask(int n_nodes, std::size_t snapshots,
                                                   double fraction, std::uint64_t seed);

/// Natural-cubic interpolation of node attribute matrices in physical time,
/// used as an input signal (not a control) by the attributed-graph tasks.
class FeaturePath {
 public:
  FeaturePath() = default;
  FeaturePath(const std::vector<double>& times, const std::vector<Matrix>& values);
  bool empty() const { return channels_.empty(); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  /// Held at the end values outside the knot range unless `mode` is last_slope.
  Matrix eval(double t, ExtrapolationMode mode = ExtrapolationMode::hold) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  double t_end_ = 0.0;
  std::vector<PiecewiseCubic> channels_;
};

}  // namespace gncde
