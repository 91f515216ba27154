#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "lrwb/error.hpp"
#include "lrwb/logistic.hpp"

using namespace lrwb;

namespace {

struct Sample {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Sample draw(int n, double bias, const Eigen::Vector2d& w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  Sample s{Eigen::MatrixXd(n, 2), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    s.x(i, 0) = normal(rng);
    s.x(i, 1) = normal(rng);
    s.y(i) = unit(rng) < sigmoid(bias + s.x.row(i).dot(w)) ? 1.0 : 0.0;
  }
  return s;
}

// Independent oracle: Newton's method on the same penalized objective.
Eigen::VectorXd newton(const Sample& s, double l2) {
  const auto n = s.x.rows();
  const auto m = s.x.cols();
  Eigen::MatrixXd a(n, m + 1);
  a.col(0).setOnes();
  a.rightCols(m) = s.x;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(m + 1, l2 / static_cast<double>(n));
  penalty(0) = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd p = a * theta;
    for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(p(i));
    const Eigen::VectorXd g = a.transpose() * (p - s.y) / static_cast<double>(n) + penalty.cwiseProduct(theta);
    const Eigen::VectorXd wts = p.array() * (1.0 - p.array());
    Eigen::MatrixXd h = a.transpose() * wts.asDiagonal() * a / static_cast<double>(n);
    h.diagonal() += penalty;
    theta -= h.ldlt().solve(g);
  }
  return theta;
}

}  // namespace

TEST_CASE("sigmoid is stable in both tails") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(sigmoid(-2.0) == doctest::Approx(0.11920292202211755).epsilon(1e-15));
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(logit(sigmoid(1.25)) == doctest::Approx(1.25));
  CHECK(sigmoid(2.0f) == doctest::Approx(0.880797f));
}

TEST_CASE("matches a Newton oracle on the penalized objective") {
  const auto s = draw(200, 0.5, {1.5, -2.0}, 3);
  for (double l2 : {1e-4, 1.0, 10.0}) {
    const auto fit = fit_logistic(s.x, s.y, {.l2 = l2, .tol = 1e-7, .max_iter = 20000});
    const auto oracle = newton(s, l2);
    CHECK(fit.converged);
    CHECK(fit.weights.bias == doctest::Approx(oracle(0)).epsilon(1e-5));
    CHECK(fit.weights.weights(0) == doctest::Approx(oracle(1)).epsilon(1e-5));
    CHECK(fit.weights.weights(1) == doctest::Approx(oracle(2)).epsilon(1e-5));
  }
}

TEST_CASE("recovers generating parameters") {
  const auto s = draw(4000, 0.5, {1.5, -2.0}, 9);
  const auto w = train_lr(s.x, s.y, {.l2 = 1e-4, .tol = 1e-8, .max_iter = 5000});
  CHECK(std::abs(w.bias - 0.5) < 0.3);
  CHECK(std::abs(w.weights(0) - 1.5) < 0.3);
  CHECK(std::abs(w.weights(1) + 2.0) < 0.3);
}

TEST_CASE("objective never increases") {
  const auto s = draw(300, -0.3, {0.7, 2.0}, 4);
  const auto fit = fit_logistic(s.x, s.y, {.l2 = 0.5});
  REQUIRE(fit.objective.size() >= 2);
  for (std::size_t i = 1; i < fit.objective.size(); ++i) CHECK(fit.objective[i] <= fit.objective[i - 1]);
}

TEST_CASE("separable data is fitted perfectly with a finite penalty") {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  Eigen::VectorXd y(6);
  y << 0, 0, 0, 1, 1, 1;
  const auto w = train_lr(x, y, {.l2 = 0.1});
  CHECK(w.all_finite());
  for (Eigen::Index i = 0; i < 6; ++i) {
    const double p = w.predict(x.row(i).transpose());
    CHECK((p >= 0.5) == (y(i) == 1.0));
  }
}

TEST_CASE("single-class input short-circuits to the clamped class rate") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  const auto ones = fit_logistic(x, Eigen::VectorXd::Ones(5), {});
  CHECK(ones.weights.weights.isZero());
  CHECK(ones.weights.bias == doctest::Approx(logit(1.0 - kSingleClassClamp)));
  const auto zeros = fit_logistic(x, Eigen::VectorXd::Zero(5), {});
  CHECK(zeros.weights.bias == doctest::Approx(logit(kSingleClassClamp)));
  CHECK(sigmoid(zeros.weights.bias) == doctest::Approx(kSingleClassClamp));
}

TEST_CASE("rejects empty and non-finite input") {
  CHECK_THROWS_AS(fit_logistic(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), {}), Error);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd y(3);
  y << 0, 1, 0;
  try {
    fit_logistic(x, y, {});
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFiniteInput);
  }
}

TEST_CASE("float-cast weights predict within float precision") {
  const auto s = draw(100, 0.1, {1.0, 1.0}, 2);
  const auto w = train_lr(s.x, s.y, {});
  const auto f = w.cast<float>();
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Eigen::VectorXd row = s.x.row(i).transpose();
    CHECK(std::abs(f.predict(row) - w.predict(row)) < 1e-6);
  }
}
