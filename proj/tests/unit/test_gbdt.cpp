#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "lrwb/error.hpp"
#include "lrwb/gbdt.hpp"
#include "lrwb/metrics.hpp"

using namespace lrwb;

namespace {

// Brute force over every feature and every midpoint between distinct values:
// best Newton gain of a single split at the root, starting from base_score.
double brute_force_root_gain(const Dataset& d, double l2, int min_child) {
  const double p0 = d.positive_rate();
  double g_tot = 0.0, h_tot = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    g_tot += p0 - d.y(i);
    h_tot += p0 * (1 - p0);
  }
  auto score = [&](double g, double h) { return g * g / (h + l2); };
  double best = 0.0;
  for (Eigen::Index j = 0; j < d.features(); ++j) {
    std::set<double> values(d.x.col(j).begin(), d.x.col(j).end());
    for (double t : values) {
      double gl = 0.0, hl = 0.0;
      int nl = 0;
      for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (d.x(i, j) < t) {
          gl += p0 - d.y(i);
          hl += p0 * (1 - p0);
          ++nl;
        }
      }
      if (nl < min_child || d.rows() - nl < min_child) continue;
      best = std::max(best, 0.5 * (score(gl, hl) + score(g_tot - gl, h_tot - hl) - score(g_tot, h_tot)));
    }
  }
  return best;
}

Dataset numeric_only(std::size_t n, std::uint64_t seed) {
  auto d = testing::synthetic(n, seed);
  d.schema = FeatureSchema({{"x0", FeatureKind::Numeric, 0},
                            {"x1", FeatureKind::Numeric, 0},
                            {"x2", FeatureKind::Boolean, 0},
                            {"x3", FeatureKind::Numeric, 0},
                            {"x4", FeatureKind::Numeric, 0},
                            {"x5", FeatureKind::Numeric, 0}});
  d.categories.assign(6, {});
  return d;
}

// Walks the tree recursively from the node list, without leaf_of().
double walk(const RegressionTree& t, std::int32_t at, const Eigen::RowVectorXd& row) {
  const auto& node = t.nodes[static_cast<std::size_t>(at)];
  if (node.kind == TreeNode::Kind::Leaf) return node.value;
  const double v = row(node.feature);
  const bool left = node.kind == TreeNode::Kind::NumericSplit ? v < node.threshold : v == node.threshold;
  return walk(t, left ? node.left : node.right, row);
}

}  // namespace

TEST_CASE("predictions match an independent recursive evaluator") {
  const auto d = testing::synthetic(100, 8);
  const auto m = train_gbdt(testing::synthetic(1000, 9), {.num_trees = 30, .max_depth = 4});
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const Eigen::RowVectorXd row = d.x.row(i);
    double z = m.base_score;
    for (const auto& t : m.trees) z += walk(t, 0, row);
    CHECK(std::abs(m.predict(row) - 1.0 / (1.0 + std::exp(-z))) <= 1e-9);
  }
}

TEST_CASE("an empty ensemble with base 0 predicts 0.5") {
  GbdtModel m;
  m.schema = FeatureSchema({{"v", FeatureKind::Numeric, 0}});
  CHECK(m.predict(Eigen::RowVectorXd::Constant(1, 3.0)) == 0.5);
}

TEST_CASE("zero trees predict the training positive rate") {
  const auto d = testing::synthetic(400, 1);
  const auto m = train_gbdt(d, {.num_trees = 0});
  CHECK(m.trees.empty());
  CHECK(m.predict(d.x.row(0)) == doctest::Approx(d.positive_rate()).epsilon(1e-12));
}

TEST_CASE("a hand-built stump with leaves +-2") {
  GbdtModel m;
  m.schema = FeatureSchema({{"v", FeatureKind::Numeric, 0}});
  RegressionTree t;
  t.nodes.resize(3);
  t.nodes[0] = {TreeNode::Kind::NumericSplit, 0, 0.5, 1, 2, 0.0, 1.0};
  t.nodes[1].value = -2.0;
  t.nodes[2].value = 2.0;
  m.trees.push_back(t);
  CHECK(m.predict(Eigen::RowVectorXd::Constant(1, 0.0)) == doctest::Approx(0.11920292202211755));
  CHECK(m.predict(Eigen::RowVectorXd::Constant(1, 1.0)) == doctest::Approx(0.8807970779778823));
  CHECK(m.predict(Eigen::RowVectorXd::Constant(1, 0.5)) == doctest::Approx(0.8807970779778823));
  CHECK(t.depth() == 1);
  CHECK_THROWS_AS(m.predict(Eigen::RowVector2d(0, 0)), Error);
}

TEST_CASE("a step function is split at the step with Newton leaf values") {
  FeatureMatrix x(40, 1);
  Eigen::VectorXi y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = i;
    y(i) = i >= 25 ? 1 : 0;
  }
  const auto d = testing::make_dataset(x, y, {{"v", FeatureKind::Numeric, 0}});
  const auto m = train_gbdt(d, {.num_trees = 1, .max_depth = 1, .learning_rate = 1.0, .min_child_rows = 1, .l2_leaf = 0.0});
  REQUIRE(m.trees.size() == 1);
  const auto& root = m.trees[0].nodes[0];
  CHECK(root.kind == TreeNode::Kind::NumericSplit);
  CHECK(root.threshold == 24.5);
  // p0 = 15/40; leaf = -sum(g)/sum(h) where g = p0 - y, h = p0(1 - p0)
  const double p0 = 15.0 / 40.0;
  const double h = p0 * (1 - p0);
  CHECK(m.trees[0].nodes[static_cast<std::size_t>(root.left)].value == doctest::Approx(-p0 / h));
  CHECK(m.trees[0].nodes[static_cast<std::size_t>(root.right)].value == doctest::Approx((1 - p0) / h));
  for (int i = 0; i < 40; ++i) CHECK((m.predict(d.x.row(i)) > 0.5) == (y(i) == 1));
}

TEST_CASE("root split gain matches a brute-force search") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = numeric_only(150, seed);
    for (int min_child : {1, 10}) {
      const auto m = train_gbdt(d, {.num_trees = 1, .max_depth = 1, .min_child_rows = min_child, .l2_leaf = 1.0});
      const auto& root = m.trees[0].nodes[0];
      REQUIRE(!root.is_leaf());
      CHECK(root.gain == doctest::Approx(brute_force_root_gain(d, 1.0, min_child)).epsilon(1e-9));
    }
  }
}

TEST_CASE("categorical splits isolate one code") {
  FeatureMatrix x(60, 1);
  Eigen::VectorXi y(60);
  for (int i = 0; i < 60; ++i) {
    x(i, 0) = i % 3;
    y(i) = (i % 3 == 2) ? 1 : 0;
  }
  const auto d = testing::make_dataset(x, y, {{"c", FeatureKind::Categorical, 3}});
  const auto m = train_gbdt(d, {.num_trees = 1, .max_depth = 1, .min_child_rows = 1});
  const auto& root = m.trees[0].nodes[0];
  CHECK(root.kind == TreeNode::Kind::CategoricalSplit);
  CHECK(root.threshold == 2.0);
}

TEST_CASE("training loss never increases and depth is bounded") {
  const auto d = testing::synthetic(1500, 7);
  for (int depth : {1, 3, 5}) {
    const auto m = train_gbdt(d, {.num_trees = 30, .max_depth = depth});
    REQUIRE(m.train_loss.size() == 31);
    for (std::size_t i = 1; i < m.train_loss.size(); ++i) CHECK(m.train_loss[i] <= m.train_loss[i - 1] + 1e-12);
    for (const auto& t : m.trees) CHECK(t.depth() <= depth);
  }
}

TEST_CASE("min_child_rows holds in every leaf") {
  const auto d = testing::synthetic(800, 3);
  const auto m = train_gbdt(d, {.num_trees = 5, .max_depth = 6, .min_child_rows = 40});
  for (const auto& t : m.trees) {
    std::vector<int> counts(t.nodes.size(), 0);
    for (Eigen::Index i = 0; i < d.rows(); ++i) ++counts[static_cast<std::size_t>(t.leaf_of(d.x.row(i)))];
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
      if (t.nodes[k].is_leaf()) CHECK(counts[k] >= 40);
    }
  }
}

TEST_CASE("training is deterministic, subsampling included") {
  const auto d = testing::synthetic(600, 2);
  const GbdtParams p{.num_trees = 10, .subsample = 0.7, .seed = 4};
  const auto a = train_gbdt(d, p);
  const auto b = train_gbdt(d, p);
  CHECK(a.trees == b.trees);
  auto q = p;
  q.seed = 5;
  CHECK_FALSE(train_gbdt(d, q).trees == a.trees);
}

TEST_CASE("beats chance clearly on held-out synthetic data") {
  const auto train = testing::synthetic(3000, 1);
  const auto test = testing::synthetic(2000, 2);
  const auto m = train_gbdt(train, {.num_trees = 100, .max_depth = 4});
  const auto p = m.predict(test);
  const std::vector<double> scores(p.begin(), p.end());
  const std::vector<int> labels(test.y.begin(), test.y.end());
  CHECK(roc_auc(scores, labels) > 0.75);
}

TEST_CASE("input validation") {
  const auto d = testing::synthetic(100, 1);
  CHECK_THROWS_AS(train_gbdt(d, {.max_depth = 0}), Error);
  CHECK_THROWS_AS(train_gbdt(d, {.learning_rate = 0.0}), Error);
  CHECK_THROWS_AS(train_gbdt(d, {.subsample = 1.5}), Error);
  auto single = d;
  single.y.setZero();
  try {
    train_gbdt(single, {});
    FAIL("expected SingleClassDataset");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingleClassDataset);
  }
}
