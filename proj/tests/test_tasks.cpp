#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gncde/tasks.hpp"

using namespace gncde;

namespace {

Dataset smoke_dataset(DynamicsKind dynamics = DynamicsKind::heat, double churn_drop = 0.05, double churn_add = 0.001) {
  DatasetSpec s;
  s.dynamics = dynamics;
  s.topology = TopologyKind::grid;
  s.n_nodes = 20;
  s.snapshots = 30;
  s.churn_drop = churn_drop;
  s.churn_add = churn_add;
  s.seed = 0;
  return generate_dataset(s);
}

TaskConfig smoke_config(Variant v, int iterations) {
  TaskConfig cfg;
  cfg.variant = v;
  cfg.train.iterations = iterations;
  cfg.train.eval_every = 100;
  cfg.split = {20, 5, 5};
  cfg.solver.step = 0.05;
  return cfg;
}

double naive_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST(Split, TrivialTwoSnapshots) {
  const Split s = split(2, {1, 0, 1}, 0);
  EXPECT_EQ(s.train, std::vector<std::size_t>{0});
  EXPECT_TRUE(s.interp.empty());
  EXPECT_EQ(s.extrap, std::vector<std::size_t>{1});
}

TEST(Split, DefaultProtocolPartition) {
  const Split s = split(120, SplitSpec{}, 5);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.interp.size(), 20u);
  EXPECT_EQ(s.extrap.size(), 20u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.interp.begin(), s.interp.end());
  all.insert(s.extrap.begin(), s.extrap.end());
  EXPECT_EQ(all.size(), 120u);
  EXPECT_EQ(*all.rbegin(), 119u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  EXPECT_LT(s.train.back(), s.extrap.front());
  for (std::size_t k : s.interp) {
    EXPECT_GT(k, s.train.front());
    EXPECT_LT(k, s.train.back());
  }
}

TEST(Split, SeededAndDeterministic) {
  const Split a = split(120, SplitSpec{}, 9);
  const Split b = split(120, SplitSpec{}, 9);
  const Split c = split(120, SplitSpec{}, 10);
  EXPECT_EQ(a.interp, b.interp);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.interp, c.interp);
}

TEST(Split, InconsistentCountsAreParameterErrors) {
  EXPECT_THROW(split(10, {5, 2, 2}, 0), ParameterError);
  EXPECT_THROW(split(4, {0, 2, 2}, 0), ParameterError);
  EXPECT_THROW(split(3, {1, 1, 1}, 0), ParameterError);  // no interior left for interpolation
  EXPECT_NO_THROW(split(4, {2, 1, 1}, 0));
}

TEST(Split, ExtrapolationTimesFollowTraining) {
  const Dataset d = smoke_dataset();
  const Split s = split(d.observations.size(), {20, 5, 5}, 3);
  const AttributeProblem p = make_attribute_problem(d.observations, s);
  EXPECT_LT(p.train.times().back(), p.extrap.times().front());
  EXPECT_GT(p.interp.times().front(), p.train.times().front());
}

TEST(Metrics, PerfectPredictionsScoreZero) {
  const Dataset d = smoke_dataset();
  const AttributeProblem p = make_attribute_problem(d.observations, split(30, {20, 5, 5}, 0));
  std::vector<Matrix> truth = *p.interp.node_states;
  truth.insert(truth.end(), p.extrap.node_states->begin(), p.extrap.node_states->end());
  const Metrics m = score_attribute_predictions(truth, p);
  for (const char* key : {"interp_l1", "extrap_l1", "sum_l1", "pooled_l1"}) EXPECT_EQ(m.at(key), 0.0) << key;
  truth[0](0, 0) += 5.0;
  EXPECT_NEAR(score_attribute_predictions(truth, p).at("interp_l1"), 5.0 / (5.0 * 20.0), 1e-12);
}

TEST(Metrics, AccuracyMatchesNaiveLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = uniform_matrix(rng, 15, 4, -1.0, 1.0);
    std::vector<int> y(15);
    for (int& v : y) v = static_cast<int>(rng.below(4));
    double hits = 0.0;
    for (int i = 0; i < 15; ++i) {
      int best = 0;
      for (int c = 1; c < 4; ++c)
        if (s(i, c) > s(i, best)) best = c;
      hits += best == y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    }
    EXPECT_NEAR(accuracy(s, y), hits / 15.0, 1e-12);
  }
  EXPECT_EQ(accuracy(Matrix::Zero(2, 3), {0, 1}), 0.5);  // ties go to class 0
}

TEST(Metrics, AucMatchesNaivePairCount) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = std::round(rng.uniform(0.0, 5.0));  // coarse values create ties
      y[i] = i < 2 ? static_cast<int>(i) : (rng.bernoulli(0.4) ? 1 : 0);
    }
    EXPECT_NEAR(auc(s, y), naive_auc(s, y), 1e-12);
  }
  EXPECT_THROW(auc({0.1, 0.2}, {1, 1}), ParameterError);
}

TEST(Metrics, StubScorersBracketAuc) {
  std::vector<int> y;
  std::vector<double> perfect;
  std::vector<double> random;
  Rng rng(3);
  for (int i = 0; i < 400; ++i) {
    y.push_back(i % 2);
    perfect.push_back(i % 2 ? 1.0 : 0.0);
    random.push_back(rng.uniform(0.0, 1.0));
  }
  EXPECT_EQ(auc(perfect, y), 1.0);
  const double r = auc(random, y);
  EXPECT_GE(r, 0.4);
  EXPECT_LE(r, 0.6);
}

TEST(Metrics, NegativeSamplesAreDistinctNonEdges) {
  const Dataset d = smoke_dataset();
  const Topology& t = d.observations.snapshots[3].topology;
  Rng rng(4);
  const PairSet p = edge_pairs_with_negatives(t, rng);
  const auto positives = static_cast<std::size_t>(std::count(p.label.begin(), p.label.end(), 1));
  EXPECT_EQ(positives, t.edge_count());
  EXPECT_EQ(p.label.size(), 2 * positives);
  std::set<std::pair<int, int>> seen;
  for (std::size_t k = 0; k < p.src.size(); ++k) {
    EXPECT_LT(p.src[k], p.dst[k]);
    EXPECT_EQ(t.adjacency(p.src[k], p.dst[k]) > 0.0, p.label[k] == 1);
    EXPECT_TRUE(seen.insert({p.src[k], p.dst[k]}).second);
  }
}

TEST(Metrics, QuantileLabelsAreBalanced) {
  const Dataset d = smoke_dataset();
  const auto labels = quantile_labels(d.observations, 4);
  for (const auto& row : labels)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(std::count(row.begin(), row.end(), c), 5);
  const Matrix& x = d.observations.node_states->at(7);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      if (x(i, 0) < x(j, 0)) EXPECT_LE(labels[7][i], labels[7][j]);
}

TEST(Tasks, ClassificationRejectsBadLabels) {
  const Dataset d = smoke_dataset();
  TaskConfig cfg = smoke_config(Variant::gncde_approx, 0);
  EXPECT_THROW(run_node_classification_task(d.observations, {}, cfg), ParameterError);
  std::vector<std::vector<int>> labels(30, std::vector<int>(20, 0));
  labels[4][2] = 7;
  EXPECT_THROW(run_node_classification_task(d.observations, labels, cfg), ParameterError);
}

TEST(Tasks, UntrainedClassifierIsNearChance) {
  const Dataset d = smoke_dataset();
  Rng rng(6);
  std::vector<std::vector<int>> labels(30, std::vector<int>(20));
  for (auto& row : labels)
    for (int& v : row) v = static_cast<int>(rng.below(4));
  const TaskResult r = run_node_classification_task(d.observations, labels, smoke_config(Variant::gncde_approx, 0));
  EXPECT_NEAR(r.metrics.at("accuracy"), 0.25, 0.15);
}

TEST(Tasks, ConstantLabelsAreLearned) {
  const Dataset d = smoke_dataset();
  const std::vector<std::vector<int>> labels(30, std::vector<int>(20, 2));
  const TaskResult r = run_node_classification_task(d.observations, labels, smoke_config(Variant::gncde_approx, 300));
  ASSERT_FALSE(r.failed) << r.message;
  EXPECT_EQ(r.metrics.at("accuracy"), 1.0);
}

TEST(Tasks, AboveMedianLabelsAreLearned) {
  const Dataset d = smoke_dataset();
  TaskConfig cfg = smoke_config(Variant::gncde_approx, 300);
  cfg.classes = 2;
  const TaskResult r = run_node_classification_task(d.observations, quantile_labels(d.observations, 2), cfg);
  ASSERT_FALSE(r.failed) << r.message;
  EXPECT_GT(r.metrics.at("accuracy"), 0.7);
  for (const auto& s : r.per_snapshot) EXPECT_TRUE(s.value >= 0.0 && s.value <= 1.0);
}

TEST(Tasks, PersistentLinksArePredicted) {
  const Dataset d = smoke_dataset(DynamicsKind::heat, 0.0, 0.0);
  const TaskResult r = run_link_prediction_task(d.observations, smoke_config(Variant::gncde_approx, 300));
  ASSERT_FALSE(r.failed) << r.message;
  EXPECT_GT(r.metrics.at("auc"), 0.9);
}

TEST(Tasks, LinkTaskNeedsPositiveEdges) {
  DynamicGraphObservations obs;
  for (int k = 0; k < 4; ++k) obs.snapshots.push_back({static_cast<double>(k), Topology::empty(5)});
  TaskConfig cfg = smoke_config(Variant::gnode, 0);
  cfg.split = {2, 0, 2};
  EXPECT_THROW(run_link_prediction_task(obs, cfg), ParameterError);
}

TEST(Tasks, MaskedTrainingStaysFinite) {
  const Dataset d = smoke_dataset();
  TaskConfig cfg = smoke_config(Variant::gncde_approx, 100);
  cfg.mask_fraction = 0.3;
  const TaskResult r = run_node_attribute_task(d.observations, cfg);
  ASSERT_FALSE(r.failed) << r.message;
  for (const auto& [k, v] : r.metrics) EXPECT_TRUE(std::isfinite(v)) << k;
}

TEST(Tasks, GraphModelBeatsBaselinesOnSmokeHeat) {
  const Dataset d = smoke_dataset();
  auto sum_l1 = [&](Variant v) {
    const TaskResult r = run_node_attribute_task(d.observations, smoke_config(v, 300));
    EXPECT_FALSE(r.failed) << r.message;
    return r.metrics.at("sum_l1");
  };
  const double approx = sum_l1(Variant::gncde_approx);
  EXPECT_LT(approx, sum_l1(Variant::gnode));
  EXPECT_LT(approx, sum_l1(Variant::neural_cde_plain));
}

TEST(Tasks, ResultsCsvRowHasAllColumns) {
  TaskResult r;
  r.metrics = {{"interp_l1", 0.5}, {"extrap_l1", 0.25}, {"sum_l1", 0.75}};
  const std::string row = results_csv_row(r, "heat", "grid", "gncde_approx", "natural_cubic", 3, 1.5);
  EXPECT_EQ(row, "attributes,heat,grid,gncde_approx,natural_cubic,3,0.5,0.25,0.75,,,1.5,ok\n");
  const std::string header = results_csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
}
