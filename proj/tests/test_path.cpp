#include <gtest/gtest.h>

#include "gncde/path.hpp"

using namespace gncde;

namespace {

const Scheme kAllSchemes[] = {Scheme::linear, Scheme::rectilinear, Scheme::natural_cubic,
                              Scheme::cubic_hermite};

DynamicGraphObservations churning_observations(int n, int snapshots, std::uint64_t seed) {
  DatasetSpec spec;
  spec.n_nodes = n;
  spec.snapshots = snapshots;
  spec.topology = TopologyKind::random;
  spec.topology_params.edge_prob = 0.3;
  spec.churn_drop = 0.3;
  spec.churn_add = 0.1;
  spec.churn_events = 6;
  spec.seed = seed;
  return generate_dataset(spec).observations;
}

DynamicGraphObservations from_matrices(const std::vector<double>& times, const std::vector<Matrix>& mats) {
  DynamicGraphObservations obs;
  for (std::size_t k = 0; k < times.size(); ++k) obs.snapshots.push_back({times[k], Topology(mats[k])});
  return obs;
}

Matrix edge(int n, int i, int j) {
  Matrix a = Matrix::Zero(n, n);
  a(i, j) = a(j, i) = 1.0;
  return a;
}

}  // namespace

TEST(Path, LinearMidpointIsAverage) {
  const Matrix a0 = edge(3, 0, 1);
  const Matrix a1 = edge(3, 1, 2);
  const auto path = build_path(from_matrices({0.0, 2.0}, {a0, a1}), Scheme::linear);
  const PathValue v = path.eval(1.0);
  EXPECT_DOUBLE_EQ(v.time, 1.0);
  EXPECT_EQ(v.adjacency, 0.5 * (a0 + a1));
  const PathDerivative d = path.eval_derivative(0.3);
  EXPECT_DOUBLE_EQ(d.d_time, 1.0);
  EXPECT_TRUE(d.d_adjacency.isApprox((a1 - a0) / 2.0));
}

TEST(Path, KnotsAreReproducedExactlyByEveryScheme) {
  const auto obs = churning_observations(12, 25, 5);
  for (Scheme s : kAllSchemes) {
    const auto path = build_path(obs, s);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const PathValue v = path.eval(path.knot_params()[k]);
      EXPECT_LE(std::abs(v.time - obs.snapshots[k].time), 1e-12) << to_string(s);
      EXPECT_LE((v.adjacency - obs.snapshots[k].topology.adjacency).cwiseAbs().maxCoeff(), 1e-12)
          << to_string(s) << " knot " << k;
    }
  }
}

TEST(Path, ConstantSegmentsStayConstant) {
  const Matrix a = edge(4, 0, 3);
  const auto path = build_path(from_matrices({0.0, 0.4, 1.0}, {a, a, edge(4, 1, 2)}), Scheme::linear);
  EXPECT_EQ(path.eval(0.2).adjacency, a);
}

TEST(Path, ConstantAdjacencyHasZeroDerivative) {
  const Matrix a = edge(5, 1, 4);
  const auto obs = from_matrices({0.0, 0.3, 0.9, 1.4}, {a, a, a, a});
  for (Scheme s : kAllSchemes) {
    const auto path = build_path(obs, s);
    EXPECT_EQ(path.varying_channels(), 0u);
    for (double u : {0.1, 0.5, 0.8}) {
      const double p = path.param_begin() + u * (path.param_end() - path.param_begin());
      EXPECT_EQ(path.eval_derivative(p).d_adjacency.cwiseAbs().maxCoeff(), 0.0) << to_string(s);
    }
  }
}

TEST(Path, RectilinearOddPointsLeadTimeAndLagAdjacency) {
  const auto obs = churning_observations(8, 10, 2);
  const auto path = build_path(obs, Scheme::rectilinear);
  EXPECT_DOUBLE_EQ(path.param_end() - path.param_begin(), 2.0 * 9.0);
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const PathValue v = path.eval(2.0 * static_cast<double>(k) + 1.0);
    EXPECT_DOUBLE_EQ(v.time, obs.snapshots[k + 1].time);
    EXPECT_EQ(v.adjacency, obs.snapshots[k].topology.adjacency);
  }
}

TEST(Path, RectilinearTimeMappingRoundTrips) {
  const auto obs = churning_observations(6, 9, 3);
  const auto path = build_path(obs, Scheme::rectilinear);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double t = obs.snapshots[k].time;
    EXPECT_DOUBLE_EQ(path.param_of_time(t), 2.0 * static_cast<double>(k));
    EXPECT_DOUBLE_EQ(path.time_of_param(path.param_of_time(t)), t);
  }
  const double mid = 0.5 * (obs.snapshots[2].time + obs.snapshots[3].time);
  EXPECT_NEAR(path.time_of_param(path.param_of_time(mid)), mid, 1e-12);
  EXPECT_GT(path.param_of_time(obs.snapshots.back().time + 0.1), path.param_end());
}

TEST(Path, HermiteKnotDerivativeIsBackwardDifference) {
  const auto obs = churning_observations(10, 12, 4);
  const auto path = build_path(obs, Scheme::cubic_hermite);
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const PathDerivative d = path.eval_derivative(obs.snapshots[k + 1].time);
    const Matrix expected = obs.snapshots[k + 1].topology.adjacency - obs.snapshots[k].topology.adjacency;
    EXPECT_LE((d.d_adjacency - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(d.d_time, obs.snapshots[k + 1].time - obs.snapshots[k].time, 1e-12);
  }
}

TEST(Path, HermiteHasContinuousFirstDerivative) {
  const auto obs = churning_observations(8, 10, 6);
  const auto path = build_path(obs, Scheme::cubic_hermite);
  for (std::size_t k = 1; k + 1 < obs.size(); ++k) {
    const double t = obs.snapshots[k].time;
    const Matrix left = path.eval_derivative(std::nextafter(t, -1.0)).d_adjacency;
    const Matrix right = path.eval_derivative(t).d_adjacency;
    EXPECT_LE((left - right).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Path, NaturalCubicIsTwiceContinuouslyDifferentiable) {
  std::vector<double> times{0.0, 0.7, 1.1, 2.0, 2.6};
  std::vector<Matrix> mats{edge(3, 0, 1), edge(3, 1, 2), edge(3, 0, 2), edge(3, 0, 1), edge(3, 1, 2)};
  const auto path = build_path(from_matrices(times, mats), Scheme::natural_cubic);
  EXPECT_LE(path.eval_second_derivative(times.front(), Side::right).d_adjacency.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(path.eval_second_derivative(times.back(), Side::left).d_adjacency.cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const Matrix left = path.eval_second_derivative(times[k], Side::left).d_adjacency;
    const Matrix right = path.eval_second_derivative(times[k], Side::right).d_adjacency;
    EXPECT_LE((left - right).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix d_left = path.eval_derivative(std::nextafter(times[k], -1.0)).d_adjacency;
    const Matrix d_right = path.eval_derivative(times[k]).d_adjacency;
    EXPECT_LE((d_left - d_right).cwiseAbs().maxCoeff(), 1e-9);
    // Central differences of the derivative agree with the analytic curvature
    // up to O(h) from the jump in the third derivative at the knot.
    const double h = 1e-5;
    const Matrix fd = (path.eval_derivative(times[k] + h).d_adjacency - path.eval_derivative(times[k] - h).d_adjacency) / (2 * h);
    EXPECT_LE((fd - right).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Path, NaturalCubicReproducesCubicInTheInterior) {
  auto poly = [](double x) { return 0.5 - 1.2 * x + 0.8 * x * x - 0.3 * x * x * x; };
  auto dpoly = [](double x) { return -1.2 + 1.6 * x - 0.9 * x * x; };
  std::vector<double> xs, ys;
  for (int i = 0; i <= 60; ++i) {
    xs.push_back(3.0 * i / 60.0);
    ys.push_back(poly(xs.back()));
  }
  const auto spline = PiecewiseCubic::natural_cubic(xs, ys);
  for (int i = 0; i <= 50; ++i) {
    const double x = 1.0 + i / 50.0;
    EXPECT_NEAR(spline.derivative(x), dpoly(x), 1e-8) << x;
    EXPECT_NEAR(spline.value(x), poly(x), 1e-8);
  }
}

TEST(Path, DerivativeMatchesCentralDifferences) {
  const auto obs = churning_observations(7, 15, 9);
  Rng rng(10);
  for (Scheme s : kAllSchemes) {
    const auto path = build_path(obs, s);
    const auto& knots = path.knot_params();
    int checked = 0;
    while (checked < 100) {
      const double p = rng.uniform(path.param_begin(), path.param_end());
      const auto it = std::upper_bound(knots.begin(), knots.end(), p);
      if (p - *(it - 1) < 1e-4 || (it != knots.end() && *it - p < 1e-4)) continue;
      if (s == Scheme::rectilinear && std::abs(p - std::round(p)) < 1e-4) continue;
      const double h = 1e-6;
      const PathValue hi = path.eval(p + h);
      const PathValue lo = path.eval(p - h);
      const PathDerivative d = path.eval_derivative(p);
      const Matrix fd = (hi.adjacency - lo.adjacency) / (2 * h);
      const double fdt = (hi.time - lo.time) / (2 * h);
      EXPECT_LT(((d.d_adjacency - fd).array().abs() / (1.0 + d.d_adjacency.array().abs())).maxCoeff(), 1e-4)
          << to_string(s) << " at " << p;
      EXPECT_LT(std::abs(d.d_time - fdt) / (1.0 + std::abs(d.d_time)), 1e-4);
      ++checked;
    }
  }
}

TEST(Path, TimeChannelHasUnitSlope) {
  const auto obs = churning_observations(5, 12, 12);
  for (Scheme s : {Scheme::linear, Scheme::natural_cubic}) {
    const auto path = build_path(obs, s);
    for (double u : {0.13, 0.5, 0.77}) {
      const double t = path.param_begin() + u * (path.param_end() - path.param_begin());
      EXPECT_NEAR(path.eval_derivative(t).d_time, 1.0, 1e-9) << to_string(s);
    }
  }
}

TEST(Path, NodePermutationCommutesWithBuild) {
  const auto obs = churning_observations(9, 11, 13);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(9);
  perm.setIdentity();
  Rng rng(14);
  std::vector<int> idx(9);
  for (int i = 0; i < 9; ++i) idx[i] = i;
  rng.shuffle(idx);
  for (int i = 0; i < 9; ++i) perm.indices()(i) = idx[i];
  auto permuted = obs;
  for (auto& snap : permuted.snapshots) snap.topology.adjacency = perm * snap.topology.adjacency * perm.transpose();
  for (Scheme s : kAllSchemes) {
    const auto a = build_path(obs, s);
    const auto b = build_path(permuted, s);
    const double p = 0.37 * a.param_end() + 0.63 * a.param_begin();
    const Matrix pa = perm * a.eval(p).adjacency * perm.transpose();
    EXPECT_LE((pa - b.eval(p).adjacency).cwiseAbs().maxCoeff(), 0.0);
    const Matrix da = perm * a.eval_derivative(p).d_adjacency * perm.transpose();
    EXPECT_LE((da - b.eval_derivative(p).d_adjacency).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Path, RejectsBadInputsAndOutOfDomainQueries) {
  const Matrix a = edge(3, 0, 1);
  EXPECT_THROW(build_path(from_matrices({0.0}, {a}), Scheme::linear), ParameterError);
  EXPECT_THROW(build_path(from_matrices({0.0, 0.0}, {a, a}), Scheme::linear), ParameterError);
  const auto path = build_path(from_matrices({0.0, 1.0}, {a, a}), Scheme::natural_cubic);
  EXPECT_THROW(path.eval(1.01), RangeError);
  EXPECT_THROW(path.eval(-0.01), RangeError);
  EXPECT_THROW(path.eval_derivative(2.0), RangeError);
}

TEST(Path, ExtensionHoldsOrContinuesFinalSlope) {
  const auto path = build_path(from_matrices({0.0, 1.0}, {edge(3, 0, 1), edge(3, 1, 2)}), Scheme::linear);
  const auto held = path.eval_extended(1.5, ExtrapolationMode::hold);
  EXPECT_EQ(Matrix(held.adjacency), edge(3, 1, 2));
  EXPECT_EQ(Matrix(path.eval_derivative_extended(1.5, ExtrapolationMode::hold).d_adjacency).cwiseAbs().maxCoeff(), 0.0);
  const auto sloped = path.eval_extended(1.5, ExtrapolationMode::last_slope);
  EXPECT_DOUBLE_EQ(sloped.time, 1.5);
  EXPECT_DOUBLE_EQ(Matrix(sloped.adjacency)(1, 2), 1.5);
  EXPECT_DOUBLE_EQ(Matrix(sloped.adjacency)(0, 1), -0.5);
}

TEST(Path, FloorAdjacencyIsMostRecentSnapshot) {
  const auto obs = churning_observations(6, 8, 15);
  const auto path = build_path(obs, Scheme::natural_cubic);
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const double mid = 0.5 * (obs.snapshots[k].time + obs.snapshots[k + 1].time);
    EXPECT_EQ(Matrix(path.floor_adjacency(mid)), obs.snapshots[k].topology.adjacency);
    EXPECT_EQ(Matrix(path.floor_adjacency(obs.snapshots[k].time)), obs.snapshots[k].topology.adjacency);
  }
}

TEST(Mask, EmptyMaskGivesIdenticalPath) {
  const auto obs = churning_observations(6, 8, 16);
  const auto masked = mask_missing(obs, {});
  for (Scheme s : kAllSchemes) {
    const auto a = build_path(obs, s);
    const auto b = build_path(masked, s);
    const double p = 0.41 * a.param_end() + 0.59 * a.param_begin();
    EXPECT_EQ(a.eval(p).adjacency, b.eval(p).adjacency);
  }
}

TEST(Mask, MissingMiddleKnotGivesSingleSegment) {
  const auto obs = from_matrices({0.0, 1.0, 3.0}, {Matrix::Zero(2, 2), edge(2, 0, 1), edge(2, 0, 1)});
  std::vector<std::vector<bool>> mask(3, std::vector<bool>(4, false));
  mask[1][1] = mask[1][2] = true;
  const auto path = build_path(mask_missing(obs, mask), Scheme::linear);
  EXPECT_NEAR(path.eval(1.0).adjacency(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(path.eval_derivative(2.0).d_adjacency(1, 0), 1.0 / 3.0, 1e-15);
}

TEST(Mask, SurvivingKnotsStayExact) {
  const auto obs = churning_observations(10, 20, 17);
  const auto mask = random_channel_mask(10, 20, 0.3, 18);
  const auto masked = mask_missing(obs, mask);
  for (Scheme s : kAllSchemes) {
    const auto path = build_path(masked, s);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const Matrix v = path.eval(path.knot_params()[k]).adjacency;
      for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
          if (masked.channel_observed(k, i, j))
            EXPECT_LE(std::abs(v(i, j) - obs.snapshots[k].topology.adjacency(i, j)), 1e-12) << to_string(s);
      EXPECT_TRUE(v.isApprox(v.transpose()));
    }
  }
}

TEST(Mask, RejectsUnderObservedChannel) {
  const auto obs = from_matrices({0.0, 1.0, 2.0}, {Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2)});
  std::vector<std::vector<bool>> mask(3, std::vector<bool>(4, false));
  mask[0][1] = mask[1][1] = true;
  EXPECT_THROW(mask_missing(obs, mask), ParameterError);
}

TEST(FeatureSeries, InterpolatesAndExtends) {
  std::vector<Matrix> vals{Matrix::Constant(2, 1, 0.0), Matrix::Constant(2, 1, 1.0), Matrix::Constant(2, 1, 2.0)};
  const FeaturePath f({0.0, 1.0, 2.0}, vals);
  EXPECT_NEAR(f.eval(0.5)(0, 0), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(f.eval(3.0)(1, 0), 2.0);
  EXPECT_NEAR(f.eval(3.0, ExtrapolationMode::last_slope)(1, 0), 3.0, 1e-12);
}
