#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lrwb/binning.hpp"
#include "lrwb/dataset.hpp"
#include "lrwb/logistic.hpp"

namespace lrwb {

/// How one inference feature is turned into an LR input.
///
/// Numeric: standardized with training mean/stddev. Boolean: passed through.
/// Categorical: each code maps to the smoothed training log-odds of its
/// class, log((pos+1)/(neg+1)), with UNKNOWN mapped to the global log-odds;
/// the encoded value is then standardized like a numeric feature.
/// All parameters are exactly representable as 32-bit floats, so an exported
/// table reproduces these inputs bit for bit.
struct InferenceFeature {
  Eigen::Index feature = 0;
  FeatureKind kind = FeatureKind::Numeric;
  double mean = 0.0;
  double stddev = 1.0;
  std::vector<double> code_values;  // categorical: cardinality + 1 entries

  double encode(double raw) const noexcept;
  double transform(double raw) const noexcept { return (encode(raw) - mean) / stddev; }

  bool operator==(const InferenceFeature&) const = default;
};

class InputTransform {
 public:
  InputTransform() = default;
  explicit InputTransform(std::vector<InferenceFeature> features) : features_(std::move(features)) {}

  static InputTransform fit(const Dataset& train, std::span<const Eigen::Index> features);

  const std::vector<InferenceFeature>& features() const noexcept { return features_; }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(features_.size()); }

  template <typename Derived>
  Eigen::VectorXd apply(const Eigen::DenseBase<Derived>& row) const {
    Eigen::VectorXd out(size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const auto& f = features_[static_cast<std::size_t>(i)];
      out(i) = f.transform(row(f.feature));
    }
    return out;
  }

  /// Transformed inputs for every row of `d` (N x m).
  Eigen::MatrixXd apply(const Dataset& d) const;

  bool operator==(const InputTransform&) const = default;

 private:
  std::vector<InferenceFeature> features_;
};

struct FirstStageParams {
  /// Per-bin fits see tens to hundreds of rows, so they get a stronger
  /// penalty than a single global LR would.
  LrParams lr{.l2 = 10.0};
  /// Bins with fewer training rows get no model and fall through to the
  /// second stage.
  int min_bin_rows = 100;
};

/// Lookup from combined bin to a local logistic regression.
struct LRwBinsModel {
  BinSpec spec;
  InputTransform inputs;
  std::map<BinId, LRWeights> weights_by_bin;
  std::map<BinId, std::size_t> train_rows;  // every non-empty training bin
  int min_bin_rows = 100;
  int quantiles = 0;  // b the spec was fitted with, 0 if unknown

  Eigen::Index inference_feature_count() const noexcept { return inputs.size(); }

  /// Probability on a hit, nullopt (a miss) when the row's bin has no weights.
  template <typename Derived>
  std::optional<double> predict(const Eigen::DenseBase<Derived>& row) const {
    const auto it = weights_by_bin.find(spec.bin_of(row));
    if (it == weights_by_bin.end()) return std::nullopt;
    return it->second.predict(inputs.apply(row));
  }

  std::vector<std::optional<double>> predict(const Dataset& d) const;
};

/// Top-m features of the ranking; m <= 0 or m > F selects all of them.
std::vector<Eigen::Index> top_features(const FeatureRanking& ranking, int m);

/// Trains one LR per combined bin that holds at least `min_bin_rows` rows.
LRwBinsModel train_lrwbins(const Dataset& train, const BinSpec& spec,
                           std::span<const Eigen::Index> inference_features,
                           const FirstStageParams& params = {});

/// Plain logistic regression on the given features: a single-bin LRwBins.
LRwBinsModel train_plain_lr(const Dataset& train, std::span<const Eigen::Index> inference_features,
                            const LrParams& params = {});

}  // namespace lrwb
