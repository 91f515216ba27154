#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lrwb/dataset.hpp"

namespace lrwb {

struct FeatureRanking;

using BinId = std::uint32_t;

/// One of the n features that define combined bins.
///
/// Numeric features split at `edges` into right-closed cells: a value equal
/// to an edge lands in the lower cell, so the digit is the number of edges
/// strictly below the value. Boolean features always have two cells.
/// Categorical features get one cell per code plus one for UNKNOWN.
struct BinnedFeature {
  Eigen::Index feature = 0;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<double> edges;
  std::uint32_t cardinality = 0;

  std::uint32_t radix() const noexcept;
  std::uint32_t digit(double value) const noexcept;

  bool operator==(const BinnedFeature&) const = default;
};

/// Mixed-radix layout over the binned features, most important first. The
/// first feature is the most significant digit.
class BinSpec {
 public:
  BinSpec() = default;
  explicit BinSpec(std::vector<BinnedFeature> features);

  const std::vector<BinnedFeature>& features() const noexcept { return features_; }
  std::size_t size() const noexcept { return features_.size(); }
  std::uint64_t total_bins() const noexcept { return total_bins_; }
  std::vector<std::uint32_t> radices() const;

  template <typename Derived>
  BinId bin_of(const Eigen::DenseBase<Derived>& row) const {
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < features_.size(); ++i) {
      index += features_[i].digit(row(features_[i].feature)) * strides_[i];
    }
    return static_cast<BinId>(index);
  }

  /// Inverse of the mixed-radix encoding.
  std::vector<std::uint32_t> digits(BinId id) const;
  BinId compose(std::span<const std::uint32_t> digits) const;

  bool operator==(const BinSpec& other) const { return features_ == other.features_; }

 private:
  std::vector<BinnedFeature> features_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t total_bins_ = 1;
};

/// Cut values at quantile levels k/b, k = 1..b-1, using the nearest-rank
/// convention (value at sorted index ceil(k*N/b) - 1). Cuts are rounded to
/// 32-bit floats so a serialized table bins identically, then duplicates and
/// cuts at or above the maximum (whose upper cell would be empty) are dropped.
std::vector<double> quantile_edges(std::span<const double> sorted_values, int b);

/// Takes the top-n ranked features of `train` and fits their cells.
BinSpec fit_bins(const Dataset& train, const FeatureRanking& ranking, int n, int b);

/// Combined bin of every row of `d`.
std::vector<BinId> assign_bins(const Dataset& d, const BinSpec& spec);

}  // namespace lrwb
