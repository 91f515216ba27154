#include "lrwb/logistic.hpp"

#include <algorithm>

#include "lrwb/error.hpp"

namespace lrwb {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr double kMinStep = 1e-20;

// log(1 + e^z) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct Problem {
  const Eigen::Ref<const Eigen::MatrixXd>& x;
  const Eigen::Ref<const Eigen::VectorXd>& y;
  double l2;
  double n;

  double objective(double bias, const Eigen::VectorXd& w) const {
    const Eigen::VectorXd z = (x * w).array() + bias;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(z(i)) - y(i) * z(i);
    return loss / n + 0.5 * l2 / n * w.squaredNorm();
  }

  void gradient(double bias, const Eigen::VectorXd& w, double& g_bias, Eigen::VectorXd& g_w) const {
    Eigen::VectorXd r = (x * w).array() + bias;
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = sigmoid(r(i)) - y(i);
    g_bias = r.sum() / n;
    g_w = x.transpose() * r / n + l2 / n * w;
  }
};

}  // namespace

LogisticFit fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const LrParams& params) {
  if (x.rows() == 0) throw Error(Errc::InvalidArgument, "logistic regression needs at least one row");
  if (x.rows() != y.size()) throw Error(Errc::InvalidArgument, "row/label count mismatch");
  if (params.l2 < 0.0) throw Error(Errc::InvalidArgument, "l2 must be >= 0");
  if (!x.allFinite() || !y.allFinite()) throw Error(Errc::NonFiniteInput, "non-finite logistic regression input");

  const auto m = x.cols();
  LogisticFit fit;
  fit.weights.weights = Eigen::VectorXd::Zero(m);

  const double n = static_cast<double>(x.rows());
  const double rate = y.sum() / n;
  if (rate <= 0.0 || rate >= 1.0) {
    const double p = std::clamp(rate, kSingleClassClamp, 1.0 - kSingleClassClamp);
    fit.weights.bias = logit(p);
    fit.converged = true;
    return fit;
  }

  const Problem problem{x, y, params.l2, n};
  double bias = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  double value = problem.objective(bias, w);
  fit.objective.push_back(value);

  // 1/L for L = 0.25 * trace(X'X)/N + l2/N, an upper bound on the curvature.
  double step = 1.0 / (0.25 * (x.squaredNorm() / n + 1.0) + params.l2 / n);
  double g_bias = 0.0;
  Eigen::VectorXd g_w(m);

  for (int iter = 0; iter < params.max_iter; ++iter) {
    problem.gradient(bias, w, g_bias, g_w);
    const double g_inf = std::max(std::abs(g_bias), m > 0 ? g_w.cwiseAbs().maxCoeff() : 0.0);
    if (g_inf < params.tol) {
      fit.converged = true;
      break;
    }
    const double g_sq = g_bias * g_bias + g_w.squaredNorm();
    double t = step * 2.0;
    double next_bias = 0.0;
    Eigen::VectorXd next_w;
    double next_value = 0.0;
    while (true) {
      next_bias = bias - t * g_bias;
      next_w = w - t * g_w;
      next_value = problem.objective(next_bias, next_w);
      if (next_value <= value - kArmijoC * t * g_sq) break;
      t *= kBacktrack;
      if (t < kMinStep) break;
    }
    if (t < kMinStep) break;  // no further progress representable
    step = t;
    bias = next_bias;
    w = std::move(next_w);
    value = next_value;
    fit.objective.push_back(value);
    fit.iterations = iter + 1;
  }

  if (!fit.converged) {
    problem.gradient(bias, w, g_bias, g_w);
    const double g_inf = std::max(std::abs(g_bias), m > 0 ? g_w.cwiseAbs().maxCoeff() : 0.0);
    fit.converged = g_inf < params.tol;
  }
  fit.weights.bias = bias;
  fit.weights.weights = std::move(w);
  if (!fit.weights.all_finite()) throw Error(Errc::NonFiniteInput, "logistic regression diverged");
  return fit;
}

}  // namespace lrwb
