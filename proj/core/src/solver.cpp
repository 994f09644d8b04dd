#include "gncde/solver.hpp"

namespace gncde {

Method parse_method(const std::string& s) {
  if (s == "euler") return Method::euler;
  if (s == "rk4") return Method::rk4;
  if (s == "dopri5") return Method::dopri5;
  throw ParameterError("unknown solver method '" + s + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::euler: return "euler";
    case Method::rk4: return "rk4";
    case Method::dopri5: return "dopri5";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!std::isfinite(step) || step < 0.0) throw ParameterError("solver.step: must be >= 0 (0 selects the default)");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ParameterError("solver.rtol/atol: must be positive");
  if (max_steps < 1) throw ParameterError("solver.max_steps: must be at least 1");
}

StepPlan plan_steps(double s0, const std::vector<double>& breakpoints, const std::vector<double>& queries,
                    double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError("plan_steps: step must be positive");
  if (queries.empty()) throw ParameterError("plan_steps: no query times");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!std::isfinite(queries[i])) throw ParameterError("plan_steps: non-finite query time");
    if (queries[i] < s0) throw ParameterError("plan_steps: query precedes the initial time");
    if (i > 0 && queries[i] < queries[i - 1]) throw ParameterError("plan_steps: queries must be sorted");
  }
  const double end = queries.back();
  std::vector<double> mandatory{s0};
  for (double b : breakpoints)
    if (b > s0 && b < end) mandatory.push_back(b);
  for (double q : queries) mandatory.push_back(q);
  std::sort(mandatory.begin(), mandatory.end());
  mandatory.erase(std::unique(mandatory.begin(), mandatory.end()), mandatory.end());

  StepPlan plan;
  plan.nodes.push_back(s0);
  for (std::size_t i = 0; i + 1 < mandatory.size(); ++i) {
    const double a = mandatory[i];
    const double b = mandatory[i + 1];
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / step - 1e-9)));
    for (std::size_t j = 1; j < pieces; ++j)
      plan.nodes.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(pieces));
    plan.nodes.push_back(b);
  }
  std::size_t at = 0;
  for (double q : queries) {
    while (plan.nodes[at] != q) ++at;
    plan.query_nodes.push_back(at);
  }
  return plan;
}

Trajectory<Matrix> integrate_dopri5(const FieldFn<Matrix>& f, const Matrix& z0, double s0,
                                    const std::vector<double>& breakpoints, const std::vector<double>& queries,
                                    const SolverConfig& cfg) {
  static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {0, 0, 0, 0, 0, 0},
      {1.0 / 5, 0, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double b5[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
  static constexpr double b4[7] = {5179.0 / 57600, 0, 7571.0 / 16695, 393.0 / 640, -92097.0 / 339200, 187.0 / 2100,
                                   1.0 / 40};

  const StepPlan pieces = plan_steps(s0, breakpoints, queries, std::numeric_limits<double>::max());
  Trajectory<Matrix> out;
  std::size_t next_query = 0;
  auto emit = [&](std::size_t node, const Matrix& z) {
    while (next_query < pieces.query_nodes.size() && pieces.query_nodes[next_query] == node) {
      out.query_times.push_back(pieces.nodes[node]);
      out.states.push_back(z);
      ++next_query;
    }
  };

  detail::check_finite(z0, s0);
  Matrix z = z0;
  emit(0, z);
  double h_prev = 0.0;
  std::size_t attempts = 0;
  for (std::size_t p = 0; p + 1 < pieces.nodes.size(); ++p) {
    double s = pieces.nodes[p];
    const double end = pieces.nodes[p + 1];
    const double len = end - s;
    double h = h_prev > 0.0 ? std::min(h_prev, len) : len / 10.0;
    while (s < end) {
      if (++attempts > cfg.max_steps)
        throw BudgetError("dopri5 exceeded max_steps = " + std::to_string(cfg.max_steps) + " at s = " +
                          std::to_string(s));
      bool last = false;
      if (s + h >= end || end - (s + h) < 1e-12 * std::max(1.0, std::abs(end))) {
        h = end - s;
        last = true;
      }
      Matrix k[7];
      for (int i = 0; i < 7; ++i) {
        Matrix zi = z;
        for (int j = 0; j < i; ++j)
          if (a[i][j] != 0.0) zi += (h * a[i][j]) * k[j];
        const double si = c[i] == 1.0 ? s + h : s + c[i] * h;
        k[i] = f(last && c[i] == 1.0 ? end : si, c[i] == 1.0 ? Side::left : Side::right, zi);
      }
      out.stats.field_evals += 7;
      Matrix z5 = z;
      Matrix err = Matrix::Zero(z.rows(), z.cols());
      for (int i = 0; i < 7; ++i) {
        if (b5[i] != 0.0) z5 += (h * b5[i]) * k[i];
        err += (h * (b5[i] - b4[i])) * k[i];
      }
      const Matrix tol = (cfg.atol + cfg.rtol * z.cwiseAbs().cwiseMax(z5.cwiseAbs()).array()).matrix();
      const double norm = std::sqrt((err.array() / tol.array()).square().mean());
      if (!std::isfinite(norm)) throw DivergenceError("dopri5: non-finite error estimate at s = " + std::to_string(s), s);
      const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      if (norm <= 1.0) {
        s = last ? end : s + h;
        z = std::move(z5);
        detail::check_finite(z, s);
        ++out.stats.steps_taken;
        if (!last) h_prev = h;
        h *= factor;
      } else {
        ++out.stats.rejected_steps;
        h *= factor;
        if (h < 1e-14 * std::max(1.0, std::abs(s)))
          throw NumericalError("dopri5: step size underflow at s = " + std::to_string(s));
      }
    }
    emit(p + 1, z);
  }
  return out;
}

OrderReport order_check(Method method, const FieldFn<Matrix>& f, const Matrix& z0,
                        const std::function<Matrix(double)>& exact, double t_end, double h0, int halvings) {
  if (method == Method::dopri5) throw CapabilityError("order_check: only fixed-step methods have a step size to vary");
  if (halvings < 1 || !(h0 > 0.0)) throw ParameterError("order_check: need h0 > 0 and at least one halving");
  OrderReport r;
  double h = h0;
  const Matrix truth = exact(t_end);
  for (int i = 0; i <= halvings; ++i, h *= 0.5) {
    const StepPlan plan = plan_steps(0.0, {}, {t_end}, h);
    const auto traj = integrate_fixed<Matrix>(f, z0, plan, method, std::numeric_limits<std::size_t>::max());
    r.steps.push_back(h);
    r.errors.push_back((traj.states.back() - truth).cwiseAbs().maxCoeff());
  }
  if (std::all_of(r.errors.begin(), r.errors.end(), [](double e) { return e == 0.0; })) {
    r.degenerate = true;
    return r;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(r.steps.size());
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const double x = std::log(r.steps[i]);
    const double y = std::log(std::max(r.errors[i], std::numeric_limits<double>::min()));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  r.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return r;
}

OrderReport order_check_exponential(Method method, double lambda) {
  const FieldFn<Matrix> f = [lambda](double, Side, const Matrix& z) { return Matrix(lambda * z); };
  return order_check(method, f, Matrix::Ones(1, 1), [lambda](double t) { return Matrix::Constant(1, 1, std::exp(lambda * t)); },
                     1.0);
}

}  // namespace gncde
