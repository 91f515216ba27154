#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "lrwb/binning.hpp"
#include "lrwb/error.hpp"
#include "lrwb/feature_ranking.hpp"
#include "lrwb/first_stage.hpp"

using namespace lrwb;

namespace {

LRwBinsModel hand_model() {
  LRwBinsModel m;
  m.spec = BinSpec({{0, FeatureKind::Boolean, {}, 0}});
  m.inputs = InputTransform({{1, FeatureKind::Numeric, 0.0, 1.0, {}}});
  LRWeights w;
  w.bias = 0.0;
  w.weights = Eigen::VectorXd::Constant(1, 2.0);
  m.weights_by_bin[1] = w;
  return m;
}

FeatureRanking identity(Eigen::Index f) {
  FeatureRanking r;
  for (Eigen::Index j = 0; j < f; ++j) r.order.push_back({j, 0.0});
  return r;
}

}  // namespace

TEST_CASE("hand-built model hits and misses") {
  const auto m = hand_model();
  const Eigen::RowVector2d hit(1.0, 1.0);
  const Eigen::RowVector2d miss(0.0, 1.0);
  REQUIRE(m.predict(hit).has_value());
  CHECK(*m.predict(hit) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  CHECK_FALSE(m.predict(miss).has_value());
}

TEST_CASE("filtering a bin turns its hits into misses") {
  auto m = hand_model();
  m.weights_by_bin.erase(1);
  CHECK_FALSE(m.predict(Eigen::RowVector2d(1.0, 1.0)).has_value());
}

TEST_CASE("categorical inputs use smoothed log-odds then standardization") {
  // Code 0: 3 pos / 1 neg, code 1: 0 pos / 2 neg.
  FeatureMatrix x(6, 1);
  x << 0, 0, 0, 0, 1, 1;
  Eigen::VectorXi y(6);
  y << 1, 1, 1, 0, 0, 0;
  const auto d = testing::make_dataset(x, y, {{"c", FeatureKind::Categorical, 2}});
  const std::vector<Eigen::Index> feats{0};
  const auto t = InputTransform::fit(d, feats);
  const auto& f = t.features()[0];
  REQUIRE(f.code_values.size() == 3);
  CHECK(f.code_values[0] == doctest::Approx(std::log(4.0 / 2.0)).epsilon(1e-7));
  CHECK(f.code_values[1] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-7));
  CHECK(f.code_values[2] == doctest::Approx(std::log(4.0 / 4.0)).epsilon(1e-7));
  CHECK(f.encode(9.0) == f.code_values[2]);
  const auto z = t.apply(d);
  CHECK(std::abs(z.col(0).mean()) < 1e-6);
  CHECK(std::abs(std::sqrt((z.col(0).array() - z.col(0).mean()).square().mean()) - 1.0) < 1e-6);
  for (double v : f.code_values) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("per-bin weights equal an LR trained on that bin alone") {
  const auto d = testing::synthetic(2000, 4);
  const auto spec = fit_bins(d, identity(6), 2, 2);  // x0 halves x x1 halves
  const std::vector<Eigen::Index> feats{0, 1, 2, 4};
  const FirstStageParams params{{.l2 = 10.0}, 100};
  const auto m = train_lrwbins(d, spec, feats, params);
  CHECK(m.weights_by_bin.size() == 4);

  const auto z = m.inputs.apply(d);
  const auto ids = assign_bins(d, spec);
  for (const auto& [bin, w] : m.weights_by_bin) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (ids[static_cast<std::size_t>(i)] == bin) rows.push_back(i);
    }
    CHECK(m.train_rows.at(bin) == rows.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), z.cols());
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      x.row(r) = z.row(rows[static_cast<std::size_t>(r)]);
      y(r) = d.y(rows[static_cast<std::size_t>(r)]);
    }
    CHECK(train_lr(x, y, params.lr) == w);
  }
}

TEST_CASE("bins under min_bin_rows get no model") {
  // 10 rows with x0 = 1 and 90 with x0 = 0.
  FeatureMatrix x(100, 2);
  Eigen::VectorXi y(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    x(i, 0) = i < 10 ? 1.0 : 0.0;
    x(i, 1) = static_cast<double>(i % 7);
    y(i) = static_cast<int>(i % 3 == 0);
  }
  const auto d = testing::make_dataset(x, y, {{"b", FeatureKind::Boolean, 0}, {"v", FeatureKind::Numeric, 0}});
  const BinSpec spec({{0, FeatureKind::Boolean, {}, 0}});
  const std::vector<Eigen::Index> feats{1};
  const auto m = train_lrwbins(d, spec, feats, {{}, 50});
  CHECK(m.weights_by_bin.count(0) == 1);
  CHECK(m.weights_by_bin.count(1) == 0);
  CHECK(m.train_rows.at(1) == 10);
  CHECK_FALSE(m.predict(d.x.row(0)).has_value());
  CHECK(m.predict(d.x.row(50)).has_value());
}

TEST_CASE("plain LR is a single-bin model that always hits") {
  const auto d = testing::synthetic(500, 2);
  const std::vector<Eigen::Index> feats{0, 1, 4};
  const auto m = train_plain_lr(d, feats);
  CHECK(m.spec.total_bins() == 1);
  for (const auto& p : m.predict(d)) {
    REQUIRE(p.has_value());
    CHECK(*p > 0.0);
    CHECK(*p < 1.0);
  }
}

TEST_CASE("top_features and argument validation") {
  FeatureRanking r;
  for (Eigen::Index j : {2, 0, 1}) r.order.push_back({j, 0.0});
  CHECK(top_features(r, 2) == std::vector<Eigen::Index>{2, 0});
  CHECK(top_features(r, 0).size() == 3);
  CHECK(top_features(r, 10).size() == 3);

  const auto d = testing::synthetic(50, 1);
  CHECK_THROWS_AS(train_lrwbins(d, BinSpec{}, std::vector<Eigen::Index>{}), Error);
  CHECK_THROWS_AS(train_lrwbins(d, BinSpec{}, std::vector<Eigen::Index>{0}, {{}, 0}), Error);
}

TEST_CASE("closed-form scores for a one-bin model") {
  LRwBinsModel m;
  m.inputs = InputTransform({{0, FeatureKind::Numeric, 0.0, 1.0, {}}});
  m.weights_by_bin[0] = LRWeights{1.0, Eigen::VectorXd::Constant(1, 2.0)};
  CHECK(*m.predict(Eigen::RowVectorXd::Constant(1, 0.5)) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  m.weights_by_bin[0] = LRWeights{0.0, Eigen::VectorXd::Zero(1)};
  CHECK(*m.predict(Eigen::RowVectorXd::Constant(1, 123.0)) == 0.5);
}
