#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrwb/allocation.hpp"
#include "lrwb/dataset.hpp"
#include "lrwb/feature_ranking.hpp"
#include "lrwb/first_stage.hpp"
#include "lrwb/gbdt.hpp"

namespace lrwb {

struct TuneGrid {
  std::vector<int> b_values{2, 3, 4};
  std::vector<int> n_values{3, 5, 7, 9};
  std::vector<int> m_values{10, 20, 0};  // 0 = all features
  std::uint64_t bin_budget = 20000;

  void validate() const;
};

struct TuneObjective {
  enum class Kind { MaxAuc, MaxCoverageAtTolerance };

  Kind kind = Kind::MaxAuc;
  double tolerance = 0.002;
  MetricKind metric = MetricKind::Accuracy;  // coverage objective only

  static TuneObjective max_auc() { return {}; }
  static TuneObjective max_coverage(double tolerance, MetricKind metric = MetricKind::Accuracy) {
    return {Kind::MaxCoverageAtTolerance, tolerance, metric};
  }
};

struct TuneCell {
  int b = 0;
  int n = 0;
  int m = 0;
  std::uint64_t total_bins = 0;
  bool skipped = false;
  std::size_t trained_bins = 0;
  double val_roc_auc = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> coverage_at_tolerance;

  double objective_value(const TuneObjective& objective) const;
};

struct TuneResult {
  std::vector<TuneCell> cells;  // grid order, b outermost
  std::size_t winner = 0;
  TuneObjective objective;

  const TuneCell& best() const { return cells.at(winner); }
  std::string to_csv() const;
};

/// Standalone scores for LRwBins: the bin's own LR on a hit, `fallback` (a
/// plain LR on the same inputs) on a miss.
std::vector<double> score_standalone(const LRwBinsModel& model, const LRwBinsModel& fallback, const Dataset& d);

/// Exhaustive search over (b, n, m). Cells whose bin count exceeds the
/// budget are recorded as skipped and never trained. The coverage objective
/// needs `second`; the AUC objective ignores it unless given, in which case
/// coverage is reported too.
TuneResult tune(const Dataset& train, const Dataset& val, const FeatureRanking& ranking,
                const TuneGrid& grid, const TuneObjective& objective,
                const GbdtModel* second = nullptr, const FirstStageParams& params = {});

}  // namespace lrwb
