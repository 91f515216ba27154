#include <random>

#include "doctest.h"
#include "lrwb/error.hpp"
#include "lrwb/metrics.hpp"

using namespace lrwb;

namespace {

// O(P*N) definition: P(s+ > s-) + 0.5 P(s+ == s-).
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("AUC corner cases") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0, 1}) == 0.5);
  try {
    roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingleClass);
  }
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), Error);
}

TEST_CASE("AUC of a fixed fixture with ties") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8, 0.4, 0.7, 0.2, 0.9, 0.35, 0.6, 0.5, 0.4};
  const std::vector<int> y{0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0, 1};
  // Positives 0.35 .8 .4 .9 .6 .4 vs negatives .1 .4 .7 .2 .35 .5:
  // wins 2.5 + 6 + 3.5 + 6 + 5 + 3.5 = 26.5 over 36 pairs.
  CHECK(roc_auc(s, y) == doctest::Approx(26.5 / 36.0).epsilon(1e-15));
  CHECK(std::abs(roc_auc(s, y) - pairwise_auc(s, y)) <= 1e-12);
}

TEST_CASE("AUC agrees with the pairwise definition on random inputs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 200;
    std::vector<double> s(n);
    std::vector<int> y(n);
    const int levels = 1 + static_cast<int>(rng() % 20);  // coarse scores force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % static_cast<std::uint64_t>(levels)) / levels;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(roc_auc(s, y) - pairwise_auc(s, y)) <= 1e-12);
    // Strictly increasing transforms leave AUC unchanged.
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
    CHECK(roc_auc(t, y) == roc_auc(s, y));
  }
}

TEST_CASE("accuracy thresholds at >= 0.5") {
  const std::vector<double> s{0.5, 0.49, 0.9, 0.1};
  CHECK(accuracy(s, std::vector<int>{1, 0, 1, 0}) == 1.0);
  CHECK(accuracy(s, std::vector<int>{0, 1, 0, 1}) == 0.0);
  CHECK(accuracy(s, std::vector<int>{1, 1, 1, 1}) == 0.5);
  CHECK(accuracy(s, std::vector<int>{1, 0, 1, 0}, 0.95) == 0.5);
  CHECK(accuracy(std::vector<double>{}, std::vector<int>{}) == 0.0);
}
