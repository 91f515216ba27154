#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "lrwb/automl.hpp"
#include "lrwb/error.hpp"

using namespace lrwb;

namespace {

// Synthetic data widened with four noise columns, so n = 9 is possible.
Dataset wide(std::size_t rows, std::uint64_t seed) {
  const auto base = testing::synthetic(rows, seed);
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> normal;
  FeatureMatrix x(base.rows(), 10);
  x.leftCols(6) = base.x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 6; j < 10; ++j) x(i, j) = normal(rng);
  }
  auto specs = base.schema.features();
  for (int j = 6; j < 10; ++j) specs.push_back({"z" + std::to_string(j), FeatureKind::Numeric, 0});
  return testing::make_dataset(x, base.y, specs);
}

FeatureRanking identity(Eigen::Index f) {
  FeatureRanking r;
  for (Eigen::Index j = 0; j < f; ++j) r.order.push_back({j, 0.0});
  return r;
}

}  // namespace

TEST_CASE("a single-cell grid picks that cell") {
  const auto train = testing::synthetic(1500, 1);
  const auto val = testing::synthetic(600, 2);
  TuneGrid g{{3}, {2}, {4}, 20000};
  const auto r = tune(train, val, identity(6), g, TuneObjective::max_auc());
  REQUIRE(r.cells.size() == 1);
  CHECK(r.winner == 0);
  CHECK(r.best().total_bins == 9);
  CHECK(r.best().val_roc_auc > 0.5);
  CHECK_FALSE(r.best().coverage_at_tolerance.has_value());
}

TEST_CASE("cells over the bin budget are skipped and never win") {
  const auto train = wide(1500, 3);
  const auto val = wide(600, 4);
  TuneGrid g{{2, 4}, {3, 9}, {5}, 20000};
  const auto r = tune(train, val, identity(10), g, TuneObjective::max_auc());
  REQUIRE(r.cells.size() == 4);
  int skipped = 0;
  for (const auto& c : r.cells) {
    if (c.b == 4 && c.n == 9) {
      CHECK(c.skipped);
      CHECK(c.total_bins > 20000);
      CHECK(c.trained_bins == 0);
    } else {
      CHECK_FALSE(c.skipped);
    }
    skipped += c.skipped;
  }
  CHECK(skipped == 1);
  CHECK_FALSE(r.best().skipped);
  const auto csv = r.to_csv();
  CHECK(csv.rfind("b,n,m,total_bins,skipped,", 0) == 0);
}

TEST_CASE("an all-skipped grid raises EmptyGridAfterBudget") {
  const auto train = testing::synthetic(300, 1);
  TuneGrid g{{4}, {6}, {0}, 100};
  try {
    tune(train, train, identity(6), g, TuneObjective::max_auc());
    FAIL("expected EmptyGridAfterBudget");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyGridAfterBudget);
  }
}

TEST_CASE("the winner is at least as good as every trained cell") {
  const auto train = testing::synthetic(2000, 5);
  const auto val = testing::synthetic(800, 6);
  const auto second = train_gbdt(train, {.num_trees = 30, .max_depth = 3});
  TuneGrid g{{2, 3}, {1, 2, 3}, {3, 0}, 20000};
  for (const auto& obj : {TuneObjective::max_auc(), TuneObjective::max_coverage(0.01)}) {
    const auto r = tune(train, val, identity(6), g, obj, &second, {{}, 30});
    CHECK(r.cells.size() == 12);
    const double best = r.best().objective_value(obj);
    for (const auto& c : r.cells) {
      if (c.skipped) continue;
      CHECK(c.coverage_at_tolerance.has_value());
      CHECK(c.objective_value(obj) <= best);
    }
  }
}

TEST_CASE("the coverage objective needs a second stage and the grid is validated") {
  const auto d = testing::synthetic(200, 1);
  CHECK_THROWS_AS(tune(d, d, identity(6), {}, TuneObjective::max_coverage(0.01)), Error);
  CHECK_THROWS_AS((TuneGrid{{1}, {2}, {3}, 10}.validate()), Error);
  CHECK_THROWS_AS((TuneGrid{{}, {2}, {3}, 10}.validate()), Error);
  CHECK_NOTHROW(TuneGrid{}.validate());
}

TEST_CASE("standalone scoring falls back to plain LR on a miss") {
  const auto d = testing::synthetic(400, 2);
  const std::vector<Eigen::Index> feats{0, 1};
  const auto fallback = train_plain_lr(d, feats);
  LRwBinsModel empty = fallback;
  empty.weights_by_bin.clear();
  const auto s = score_standalone(empty, fallback, d);
  for (Eigen::Index i = 0; i < d.rows(); ++i) CHECK(s[static_cast<std::size_t>(i)] == *fallback.predict(d.x.row(i)));
}
