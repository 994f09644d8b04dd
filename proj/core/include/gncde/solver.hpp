#pragma once

// Time stepping for dZ/ds = f(s, Z).
//
// Fixed-step methods (euler, rk4) split [s0, s_last] at every breakpoint and
// query point and take uniform substeps inside each piece, so a path whose
// derivative jumps at knots is never straddled. They work on Matrix and on
// taped Var states alike. dopri5 is adaptive and eager only.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "gncde/autodiff.hpp"
#include "gncde/path.hpp"

namespace gncde {

enum class Method { euler, rk4, dopri5 };

Method parse_method(const std::string& s);
std::string to_string(Method m);

struct SolverConfig {
  Method method = Method::rk4;
  double step = 0.0;  // <= 0: span / 400
  double rtol = 1e-6;
  double atol = 1e-8;
  std::size_t max_steps = 1000000;
  ExtrapolationMode extrapolation = ExtrapolationMode::hold;

  void validate() const;
  double resolved_step(double span) const { return step > 0.0 ? step : span / 400.0; }
};

struct SolverStats {
  std::size_t steps_taken = 0;
  std::size_t rejected_steps = 0;
  std::size_t field_evals = 0;
};

template <class T>
struct Trajectory {
  std::vector<double> query_times;
  std::vector<T> states;
  SolverStats stats;
};

using EmbeddingTrajectory = Trajectory<Matrix>;

/// Step boundaries for a fixed-step solve. `query_nodes[i]` indexes the
/// boundary that coincides with query i.
struct StepPlan {
  std::vector<double> nodes;
  std::vector<std::size_t> query_nodes;
  std::size_t steps() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

/// Queries must be sorted and >= s0. Breakpoints outside (s0, last query]
/// are ignored.
StepPlan plan_steps(double s0, const std::vector<double>& breakpoints, const std::vector<double>& queries,
                    double step);

/// Field signature shared by all solvers: f(s, side, z). `side` tells the
/// field which one-sided limit to take when s sits on a breakpoint: the
/// first stage of a step looks right, the last stage looks left.
template <class T>
using FieldFn = std::function<T(double, Side, const T&)>;

namespace detail {

inline bool finite_state(const Matrix& m) { return m.allFinite(); }
inline bool finite_state(const Var& v) { return v.value().allFinite(); }

template <class T>
void check_finite(const T& z, double s) {
  if (!finite_state(z)) throw DivergenceError("non-finite state at s = " + std::to_string(s), s);
}

}  // namespace detail

template <class T>
Trajectory<T> integrate_fixed(const FieldFn<T>& f, const T& z0, const StepPlan& plan, Method method,
                              std::size_t max_steps) {
  if (method == Method::dopri5) throw ParameterError("integrate_fixed: dopri5 is adaptive");
  if (plan.steps() > max_steps)
    throw BudgetError("fixed-step plan needs " + std::to_string(plan.steps()) + " steps, budget is " +
                      std::to_string(max_steps));
  detail::check_finite(z0, plan.nodes.front());
  Trajectory<T> out;
  out.states.reserve(plan.query_nodes.size());
  std::size_t next_query = 0;
  auto emit = [&](std::size_t node, const T& z) {
    while (next_query < plan.query_nodes.size() && plan.query_nodes[next_query] == node) {
      out.query_times.push_back(plan.nodes[node]);
      out.states.push_back(z);
      ++next_query;
    }
  };
  T z = z0;
  emit(0, z);
  for (std::size_t i = 0; i + 1 < plan.nodes.size(); ++i) {
    const double s = plan.nodes[i];
    const double s1 = plan.nodes[i + 1];
    const double h = s1 - s;
    if (method == Method::euler) {
      const T k1 = f(s, Side::right, z);
      z = lincomb(std::vector<double>{1.0, h}, std::vector<T>{z, k1});
      out.stats.field_evals += 1;
    } else {
      const double mid = s + 0.5 * h;
      const T k1 = f(s, Side::right, z);
      const T k2 = f(mid, Side::right, lincomb(std::vector<double>{1.0, 0.5 * h}, std::vector<T>{z, k1}));
      const T k3 = f(mid, Side::right, lincomb(std::vector<double>{1.0, 0.5 * h}, std::vector<T>{z, k2}));
      const T k4 = f(s1, Side::left, lincomb(std::vector<double>{1.0, h}, std::vector<T>{z, k3}));
      z = lincomb(std::vector<double>{1.0, h / 6.0, h / 3.0, h / 3.0, h / 6.0}, std::vector<T>{z, k1, k2, k3, k4});
      out.stats.field_evals += 4;
    }
    ++out.stats.steps_taken;
    detail::check_finite(z, s1);
    emit(i + 1, z);
  }
  return out;
}

/// Adaptive Dormand-Prince 5(4) with mixed RMS error control. Breakpoints
/// and queries are hit exactly; each piece between them is integrated
/// separately.
Trajectory<Matrix> integrate_dopri5(const FieldFn<Matrix>& f, const Matrix& z0, double s0,
                                    const std::vector<double>& breakpoints, const std::vector<double>& queries,
                                    const SolverConfig& cfg);

/// Solves from s0 to every query (sorted, >= s0). Fixed-step methods use
/// cfg.resolved_step(span) with span the distance from s0 to the last query.
template <class T>
Trajectory<T> integrate(const FieldFn<T>& f, const T& z0, double s0, const std::vector<double>& breakpoints,
                        const std::vector<double>& queries, const SolverConfig& cfg) {
  cfg.validate();
  if (queries.empty()) throw ParameterError("integrate: no query times");
  if (cfg.method == Method::dopri5) {
    if constexpr (std::is_same_v<T, Matrix>) {
      return integrate_dopri5(f, z0, s0, breakpoints, queries, cfg);
    } else {
      throw CapabilityError(
          "dopri5 cannot be recorded for gradients: adaptive step selection is data dependent; use rk4 or euler");
    }
  }
  const double span = queries.back() - s0;
  const StepPlan plan = plan_steps(s0, breakpoints, queries, cfg.resolved_step(span > 0.0 ? span : 1.0));
  return integrate_fixed<T>(f, z0, plan, cfg.method, cfg.max_steps);
}

struct OrderReport {
  bool degenerate = false;
  double order = 0.0;
  std::vector<double> steps;
  std::vector<double> errors;
};

/// Global error at t_end for step sizes h0, h0/2, ... (halvings + 1 sizes)
/// and the least-squares slope of log(error) against log(h). Reports
/// `degenerate` when every error is exactly zero.
OrderReport order_check(Method method, const FieldFn<Matrix>& f, const Matrix& z0,
                        const std::function<Matrix(double)>& exact, double t_end, double h0 = 0.2,
                        int halvings = 4);

/// dz/dt = lambda * z, z(0) = 1 on [0, 1].
OrderReport order_check_exponential(Method method, double lambda = -1.0);

}  // namespace gncde
