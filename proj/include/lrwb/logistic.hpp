#pragma once

#include <cmath>
#include <concepts>
#include <vector>

#include <Eigen/Core>

namespace lrwb {

/// Logistic function, branching on sign so neither exp() overflows.
template <std::floating_point T>
T sigmoid(T z) noexcept {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <std::floating_point T>
T logit(T p) noexcept {
  return std::log(p / (T(1) - p));
}

/// Bias plus one weight per inference feature.
template <typename Scalar>
struct LogisticWeights {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Scalar bias{0};
  Vector weights;

  /// bias + w.x, accumulated in double whatever the storage precision.
  template <typename Derived>
  double margin(const Eigen::MatrixBase<Derived>& x) const {
    double z = static_cast<double>(bias);
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      z += static_cast<double>(weights(i)) * static_cast<double>(x(i));
    }
    return z;
  }

  template <typename Derived>
  double predict(const Eigen::MatrixBase<Derived>& x) const {
    return sigmoid(margin(x));
  }

  bool all_finite() const {
    return std::isfinite(static_cast<double>(bias)) && weights.allFinite();
  }

  template <typename Other>
  LogisticWeights<Other> cast() const {
    return {static_cast<Other>(bias), weights.template cast<Other>()};
  }

  bool operator==(const LogisticWeights& o) const { return bias == o.bias && weights == o.weights; }
};

using LRWeights = LogisticWeights<double>;

struct LrParams {
  double l2 = 1.0;
  double tol = 1e-6;
  int max_iter = 500;
};

struct LogisticFit {
  LRWeights weights;
  /// Objective after each accepted step, starting with the initial point.
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
};

/// Class rates are clamped to this distance from 0 and 1 for single-class fits.
inline constexpr double kSingleClassClamp = 1e-6;

/// Minimizes mean log-loss + l2/(2N) * |w|^2 (bias unpenalized) by
/// full-batch gradient descent with Armijo backtracking (beta 0.5, c 1e-4),
/// starting from zero. Stops when the gradient's max-norm drops below `tol`
/// or after `max_iter` steps. Single-class inputs short-circuit to zero
/// weights and the logit of the clamped class rate.
LogisticFit fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const LrParams& params);

inline LRWeights train_lr(const Eigen::Ref<const Eigen::MatrixXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y, const LrParams& params) {
  return fit_logistic(x, y, params).weights;
}

}  // namespace lrwb
