#include "lrwb/feature_ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lrwb/binning.hpp"
#include "lrwb/error.hpp"

namespace lrwb {

std::string FeatureRanking::to_text(const FeatureSchema& schema) const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto j = static_cast<std::size_t>(order[r].feature);
    os << r << ',' << j << ',' << (j < schema.size() ? schema[j].name : std::string("?")) << ','
       << order[r].score << '\n';
  }
  return os.str();
}

double mutual_information(const std::vector<int>& a, int a_levels, const std::vector<int>& b, int b_levels) {
  if (a.size() != b.size()) throw Error(Errc::InvalidArgument, "mutual information needs equal-length inputs");
  if (a.empty()) return 0.0;
  const auto na = static_cast<std::size_t>(a_levels);
  const auto nb = static_cast<std::size_t>(b_levels);
  std::vector<double> joint(na * nb, 0.0), pa(na, 0.0), pb(nb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[static_cast<std::size_t>(a[i]) * nb + static_cast<std::size_t>(b[i])] += 1.0;
    pa[static_cast<std::size_t>(a[i])] += 1.0;
    pb[static_cast<std::size_t>(b[i])] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t x = 0; x < na; ++x) {
    for (std::size_t y = 0; y < nb; ++y) {
      const double c = joint[x * nb + y];
      if (c == 0.0) continue;
      mi += c / n * std::log(c * n / (pa[x] * pb[y]));
    }
  }
  return std::max(mi, 0.0);
}

std::vector<std::vector<int>> discretize(const Dataset& d, int bins, std::vector<int>* levels) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(d.features()));
  if (levels) levels->assign(out.size(), 1);
  std::vector<double> sorted;
  for (Eigen::Index j = 0; j < d.features(); ++j) {
    const auto& spec = d.schema[static_cast<std::size_t>(j)];
    BinnedFeature cell;
    cell.kind = spec.kind;
    cell.cardinality = spec.cardinality;
    if (spec.kind == FeatureKind::Numeric) {
      const auto col = d.x.col(j);
      sorted.assign(col.begin(), col.end());
      std::sort(sorted.begin(), sorted.end());
      cell.edges = quantile_edges(sorted, bins);
    }
    auto& codes = out[static_cast<std::size_t>(j)];
    codes.resize(static_cast<std::size_t>(d.rows()));
    for (Eigen::Index i = 0; i < d.rows(); ++i) codes[static_cast<std::size_t>(i)] = static_cast<int>(cell.digit(d.x(i, j)));
    if (levels) (*levels)[static_cast<std::size_t>(j)] = static_cast<int>(cell.radix());
  }
  return out;
}

FeatureRanking rank_mrmr(const Dataset& d, int discretization_bins) {
  if (discretization_bins < 2) throw Error(Errc::InvalidArgument, "discretization_bins must be >= 2");
  std::vector<int> levels;
  const auto codes = discretize(d, discretization_bins, &levels);
  const std::vector<int> labels(d.y.begin(), d.y.end());
  const std::size_t f = codes.size();

  std::vector<double> relevance(f);
  for (std::size_t j = 0; j < f; ++j) relevance[j] = mutual_information(codes[j], levels[j], labels, 2);

  FeatureRanking ranking;
  ranking.method = RankingMethod::Mrmr;
  std::vector<double> redundancy(f, 0.0);  // running sum over selected features
  std::vector<bool> chosen(f, false);
  for (std::size_t step = 0; step < f; ++step) {
    std::size_t pick = f;
    double pick_score = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      if (chosen[j]) continue;
      const double score = step == 0 ? relevance[j] : relevance[j] - redundancy[j] / static_cast<double>(step);
      if (pick == f || score > pick_score) {
        pick = j;
        pick_score = score;
      }
    }
    chosen[pick] = true;
    ranking.order.push_back({static_cast<Eigen::Index>(pick), pick_score});
    for (std::size_t j = 0; j < f; ++j) {
      if (!chosen[j]) redundancy[j] += mutual_information(codes[j], levels[j], codes[pick], levels[pick]);
    }
  }
  return ranking;
}

FeatureRanking rank_by_gain(const GbdtModel& model) {
  const auto gain = model.feature_gain();
  std::vector<Eigen::Index> idx(gain.size());
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return gain[static_cast<std::size_t>(a)] > gain[static_cast<std::size_t>(b)];
  });
  FeatureRanking ranking;
  ranking.method = RankingMethod::GbdtGain;
  for (const auto j : idx) ranking.order.push_back({j, gain[static_cast<std::size_t>(j)]});
  return ranking;
}

FeatureRanking rank_gbdt_gain(const Dataset& d, const GbdtParams& params) {
  params.validate();
  if (params.num_trees == 0) {
    GbdtModel empty;
    empty.schema = d.schema;
    return rank_by_gain(empty);
  }
  return rank_by_gain(train_gbdt(d, params));
}

}  // namespace lrwb
