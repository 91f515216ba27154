#include "lrwb/binning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrwb/error.hpp"
#include "lrwb/feature_ranking.hpp"

namespace lrwb {

std::uint32_t BinnedFeature::radix() const noexcept {
  switch (kind) {
    case FeatureKind::Numeric: return static_cast<std::uint32_t>(edges.size()) + 1;
    case FeatureKind::Boolean: return 2;
    case FeatureKind::Categorical: return cardinality + 1;
  }
  return 1;
}

std::uint32_t BinnedFeature::digit(double value) const noexcept {
  switch (kind) {
    case FeatureKind::Numeric:
      return static_cast<std::uint32_t>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
    case FeatureKind::Boolean:
      return value != 0.0 ? 1 : 0;
    case FeatureKind::Categorical:
      if (value >= 0.0 && value < static_cast<double>(cardinality) && value == std::floor(value)) {
        return static_cast<std::uint32_t>(value);
      }
      return cardinality;
  }
  return 0;
}

BinSpec::BinSpec(std::vector<BinnedFeature> features) : features_(std::move(features)) {
  strides_.assign(features_.size(), 1);
  total_bins_ = 1;
  for (std::size_t i = features_.size(); i-- > 0;) {
    const auto& f = features_[i];
    if (f.kind == FeatureKind::Numeric && !std::is_sorted(f.edges.begin(), f.edges.end())) {
      throw Error(Errc::InvalidArgument, "bin edges must be sorted");
    }
    if (std::adjacent_find(f.edges.begin(), f.edges.end()) != f.edges.end()) {
      throw Error(Errc::InvalidArgument, "bin edges must be strictly increasing");
    }
    strides_[i] = total_bins_;
    total_bins_ *= f.radix();
    if (total_bins_ > std::numeric_limits<BinId>::max()) {
      throw Error(Errc::InvalidArgument, "combined bin space exceeds 32 bits");
    }
  }
}

std::vector<std::uint32_t> BinSpec::radices() const {
  std::vector<std::uint32_t> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.radix());
  return out;
}

std::vector<std::uint32_t> BinSpec::digits(BinId id) const {
  std::vector<std::uint32_t> out(features_.size());
  std::uint64_t rest = id;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    out[i] = static_cast<std::uint32_t>(rest / strides_[i]);
    rest %= strides_[i];
  }
  return out;
}

BinId BinSpec::compose(std::span<const std::uint32_t> digits) const {
  if (digits.size() != features_.size()) throw Error(Errc::InvalidArgument, "digit count mismatch");
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] >= features_[i].radix()) throw Error(Errc::InvalidArgument, "digit out of range");
    index += digits[i] * strides_[i];
  }
  return static_cast<BinId>(index);
}

std::vector<double> quantile_edges(std::span<const double> sorted_values, int b) {
  if (b < 2) throw Error(Errc::InvalidArgument, "b must be >= 2");
  const auto n = sorted_values.size();
  if (n == 0) throw Error(Errc::EmptyTrainingSet, "cannot fit quantiles on zero rows");
  const double max_value = sorted_values.back();
  std::vector<double> edges;
  for (int k = 1; k < b; ++k) {
    // ceil(k * n / b) - 1 in integer arithmetic
    const std::size_t rank = (static_cast<std::size_t>(k) * n + static_cast<std::size_t>(b) - 1) /
                             static_cast<std::size_t>(b);
    const double cut = static_cast<double>(static_cast<float>(sorted_values[std::max<std::size_t>(rank, 1) - 1]));
    if (cut >= max_value) continue;
    if (!edges.empty() && cut <= edges.back()) continue;
    edges.push_back(cut);
  }
  return edges;
}

BinSpec fit_bins(const Dataset& train, const FeatureRanking& ranking, int n, int b) {
  if (train.rows() == 0) throw Error(Errc::EmptyTrainingSet, "cannot fit bins on zero rows");
  if (n < 1 || static_cast<std::size_t>(n) > ranking.order.size()) {
    throw Error(Errc::InvalidArgument, "n must be in [1, feature count]");
  }
  if (b < 2) throw Error(Errc::InvalidArgument, "b must be >= 2");

  std::vector<BinnedFeature> features;
  std::vector<double> column;
  for (int i = 0; i < n; ++i) {
    const auto j = ranking.order[static_cast<std::size_t>(i)].feature;
    const auto& spec = train.schema[static_cast<std::size_t>(j)];
    BinnedFeature f;
    f.feature = j;
    f.kind = spec.kind;
    if (spec.kind == FeatureKind::Numeric) {
      const auto col = train.x.col(j);
      column.assign(col.begin(), col.end());
      std::sort(column.begin(), column.end());
      f.edges = quantile_edges(column, b);
    } else if (spec.kind == FeatureKind::Categorical) {
      f.cardinality = spec.cardinality;
    }
    features.push_back(std::move(f));
  }
  return BinSpec(std::move(features));
}

std::vector<BinId> assign_bins(const Dataset& d, const BinSpec& spec) {
  std::vector<BinId> out(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) out[static_cast<std::size_t>(i)] = spec.bin_of(d.x.row(i));
  return out;
}

}  // namespace lrwb
