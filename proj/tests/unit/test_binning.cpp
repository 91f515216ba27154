#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "lrwb/binning.hpp"
#include "lrwb/error.hpp"
#include "lrwb/feature_ranking.hpp"

using namespace lrwb;

namespace {

FeatureRanking identity_ranking(Eigen::Index f) {
  FeatureRanking r;
  for (Eigen::Index j = 0; j < f; ++j) r.order.push_back({j, static_cast<double>(f - j)});
  return r;
}

}  // namespace

TEST_CASE("nearest-rank quantiles of 1..9 with b=3") {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(quantile_edges(v, 3) == std::vector<double>{3, 6});
  CHECK(quantile_edges(v, 2) == std::vector<double>{5});
}

TEST_CASE("edges drop duplicates and cuts at the maximum") {
  CHECK(quantile_edges(std::vector<double>{4, 4, 4, 4}, 3).empty());
  CHECK(quantile_edges(std::vector<double>{1, 1, 1, 1, 1, 2}, 3) == std::vector<double>{1});
  // 0.1 is not a float, so the stored edge is its float rounding.
  const auto e = quantile_edges(std::vector<double>{0.1, 0.2}, 2);
  REQUIRE(e.size() == 1);
  CHECK(e[0] == static_cast<double>(0.1f));
  CHECK_THROWS_AS(quantile_edges(std::vector<double>{1.0}, 1), Error);
}

TEST_CASE("a value equal to an edge goes to the lower cell") {
  BinnedFeature f{0, FeatureKind::Numeric, {3, 6}, 0};
  CHECK(f.radix() == 3);
  CHECK(f.digit(2.9) == 0);
  CHECK(f.digit(3.0) == 0);
  CHECK(f.digit(3.1) == 1);
  CHECK(f.digit(6.0) == 1);
  CHECK(f.digit(100.0) == 2);
  CHECK(f.digit(-1e300) == 0);
}

TEST_CASE("categoricals get one cell per code plus UNKNOWN") {
  BinnedFeature f{0, FeatureKind::Categorical, {}, 4};
  CHECK(f.radix() == 5);
  CHECK(f.digit(0) == 0);
  CHECK(f.digit(3) == 3);
  CHECK(f.digit(4) == 4);
  CHECK(f.digit(17) == 4);
  CHECK(f.digit(-1) == 4);
  CHECK(f.digit(1.5) == 4);
  BinnedFeature b{0, FeatureKind::Boolean, {}, 0};
  CHECK(b.radix() == 2);
  CHECK(b.digit(1.0) == 1);
}

TEST_CASE("mixed radix puts the first feature in the most significant digit") {
  // radices (3, 4): id = d0 * 4 + d1
  BinSpec spec({{0, FeatureKind::Numeric, {1, 2}, 0}, {1, FeatureKind::Categorical, {}, 3}});
  CHECK(spec.total_bins() == 12);
  Eigen::RowVector2d row(1.5, 1.0);
  CHECK(spec.bin_of(row) == 5);
  CHECK(spec.digits(5) == std::vector<std::uint32_t>{1, 1});

  // radices (4, 4, 4): digits (3, 2, 1) -> 3*16 + 2*4 + 1 = 57
  BinSpec cube({{0, FeatureKind::Numeric, {0, 1, 2}, 0},
                {1, FeatureKind::Numeric, {0, 1, 2}, 0},
                {2, FeatureKind::Numeric, {0, 1, 2}, 0}});
  CHECK(cube.total_bins() == 64);
  Eigen::RowVector3d r(5.0, 1.5, 0.5);
  CHECK(cube.bin_of(r) == 57);
  const std::vector<std::uint32_t> d{3, 2, 1};
  CHECK(cube.compose(d) == 57);
  const std::vector<std::uint32_t> bad{4, 0, 0};
  CHECK_THROWS_AS(cube.compose(bad), Error);
}

TEST_CASE("fit_bins on a constant numeric feature gives a single bin") {
  FeatureMatrix x = FeatureMatrix::Constant(20, 1, 7.0);
  Eigen::VectorXi y = Eigen::VectorXi::Zero(20);
  y(0) = 1;
  const auto d = testing::make_dataset(x, y, {{"c", FeatureKind::Numeric, 0}});
  const auto spec = fit_bins(d, identity_ranking(1), 1, 4);
  CHECK(spec.total_bins() == 1);
  for (auto id : assign_bins(d, spec)) CHECK(id == 0);
}

TEST_CASE("fit_bins follows the ranking order and validates n and b") {
  const auto d = testing::synthetic(300, 1);
  FeatureRanking r;
  for (Eigen::Index j : {3, 0, 2, 1, 4, 5}) r.order.push_back({j, 0.0});
  const auto spec = fit_bins(d, r, 3, 3);
  REQUIRE(spec.size() == 3);
  CHECK(spec.features()[0].feature == 3);
  CHECK(spec.features()[0].radix() == 6);
  CHECK(spec.features()[1].feature == 0);
  CHECK(spec.features()[1].radix() == 3);
  CHECK(spec.features()[2].radix() == 2);
  CHECK(spec.total_bins() == 36);
  CHECK_THROWS_AS(fit_bins(d, r, 0, 3), Error);
  CHECK_THROWS_AS(fit_bins(d, r, 7, 3), Error);
  CHECK_THROWS_AS(fit_bins(d, r, 2, 1), Error);
}

TEST_CASE("every row lands in exactly one bin below total_bins and digits round-trip") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_rows = 5 + static_cast<int>(rng() % 60);
    const auto d = testing::synthetic(static_cast<std::size_t>(n_rows), rng());
    const int n = 1 + static_cast<int>(rng() % 6);
    const int b = 2 + static_cast<int>(rng() % 4);
    FeatureRanking r = identity_ranking(6);
    std::shuffle(r.order.begin(), r.order.end(), rng);
    const auto spec = fit_bins(d, r, n, b);
    for (const auto& f : spec.features()) {
      if (f.kind == FeatureKind::Numeric) REQUIRE(f.edges.size() <= static_cast<std::size_t>(b - 1));
    }
    const auto ids = assign_bins(d, spec);
    REQUIRE(ids.size() == static_cast<std::size_t>(n_rows));
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      const auto id = ids[static_cast<std::size_t>(i)];
      REQUIRE(id < spec.total_bins());
      const auto digits = spec.digits(id);
      for (std::size_t k = 0; k < digits.size(); ++k) {
        const auto& f = spec.features()[k];
        REQUIRE(digits[k] == f.digit(d.x(i, f.feature)));
      }
      REQUIRE(spec.compose(digits) == id);
    }
  }
}

TEST_CASE("numeric cells from training quantiles are roughly balanced") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  FeatureMatrix x(3000, 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = normal(rng);
  Eigen::VectorXi y = Eigen::VectorXi::Zero(3000);
  y(0) = 1;
  const auto d = testing::make_dataset(x, y, {{"v", FeatureKind::Numeric, 0}});
  const auto spec = fit_bins(d, identity_ranking(1), 1, 4);
  REQUIRE(spec.total_bins() == 4);
  std::vector<int> counts(4, 0);
  for (auto id : assign_bins(d, spec)) ++counts[id];
  for (int c : counts) CHECK(std::abs(c - 750) <= 2);
}
