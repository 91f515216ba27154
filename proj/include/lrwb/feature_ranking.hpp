#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lrwb/dataset.hpp"
#include "lrwb/gbdt.hpp"

namespace lrwb {

enum class RankingMethod { GbdtGain, Mrmr };

struct RankedFeature {
  Eigen::Index feature = 0;
  double score = 0.0;
};

/// Permutation of all features, most important first.
struct FeatureRanking {
  std::vector<RankedFeature> order;
  RankingMethod method = RankingMethod::GbdtGain;

  /// `rank,index,name,score` lines, best first.
  std::string to_text(const FeatureSchema& schema) const;
};

/// Plug-in mutual information (natural log) between two discrete variables.
double mutual_information(const std::vector<int>& a, int a_levels, const std::vector<int>& b, int b_levels);

/// Equal-frequency discretization of every feature; Boolean and Categorical
/// features keep their codes.
std::vector<std::vector<int>> discretize(const Dataset& d, int bins, std::vector<int>* levels = nullptr);

/// Greedy MRMR, difference form: relevance I(f;y) minus the mean redundancy
/// I(f;s) over already selected features. Ties go to the lower index.
FeatureRanking rank_mrmr(const Dataset& d, int discretization_bins = 10);

/// Orders features by total split gain in `model`; unused features follow
/// in index order with score 0.
FeatureRanking rank_by_gain(const GbdtModel& model);

/// Trains a GBDT on `d` and ranks by its split gain.
FeatureRanking rank_gbdt_gain(const Dataset& d, const GbdtParams& params = {});

}  // namespace lrwb
