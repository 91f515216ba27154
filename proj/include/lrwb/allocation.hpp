#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lrwb/binning.hpp"
#include "lrwb/dataset.hpp"
#include "lrwb/first_stage.hpp"
#include "lrwb/gbdt.hpp"
#include "lrwb/metrics.hpp"

namespace lrwb {

/// Both stages' outputs on one evaluation set, computed once and shared by
/// the per-bin evaluation and the sweep.
struct StageScores {
  std::vector<BinId> bins;
  std::vector<std::optional<double>> first;  // nullopt = miss
  std::vector<double> second;
  std::vector<int> labels;

  static StageScores compute(const LRwBinsModel& first, const GbdtModel& second, const Dataset& d);
  std::size_t size() const noexcept { return labels.size(); }
};

struct BinReport {
  BinId bin = 0;
  std::size_t rows = 0;
  std::optional<double> first_metric;   // nullopt: no weights or undefined
  std::optional<double> second_metric;  // nullopt: undefined (single-class bin under ROC AUC)
  /// second - first; +inf marks a bin that can never go to the first stage.
  double delta = std::numeric_limits<double>::infinity();

  bool eligible() const noexcept { return delta != std::numeric_limits<double>::infinity(); }
};

struct CurvePoint {
  std::size_t cut_index = 0;       // number of bins in the first-stage prefix
  std::size_t covered_rows = 0;
  double coverage = 0.0;
  double hybrid_accuracy = 0.0;    // whole evaluation set
  double hybrid_auc = 0.0;         // whole evaluation set, NaN if single-class
  double delta_vs_second = 0.0;    // second-stage metric - hybrid metric
  std::optional<double> prefix_first_metric;  // first stage on the prefix rows only
};

struct CoverageCurve {
  MetricKind metric = MetricKind::Accuracy;
  std::vector<BinId> order;        // eligible bins, in sweep order
  std::vector<CurvePoint> points;  // points[k] uses order[0..k)
  double second_accuracy = 0.0;
  double second_auc = 0.0;
  std::size_t total_rows = 0;

  double second_metric() const { return metric == MetricKind::Accuracy ? second_accuracy : second_auc; }
  std::string to_csv() const;
};

struct Allocation {
  std::set<BinId> first_stage_bins;
  double coverage = 0.0;
  double tolerance = 0.0;
  MetricKind metric = MetricKind::Accuracy;
  std::size_t cut_index = 0;

  /// One bin id per line.
  std::string to_text() const;
  static Allocation parse(std::string_view text);
};

std::vector<BinReport> evaluate_per_bin(const StageScores& scores, MetricKind metric);
std::vector<BinReport> evaluate_per_bin(const LRwBinsModel& first, const GbdtModel& second,
                                        const Dataset& val, MetricKind metric);

/// Orders eligible bins by ascending delta (ties: more rows first, then
/// lower id) and evaluates the hybrid predictor for every prefix.
CoverageCurve sweep(const std::vector<BinReport>& reports, const StageScores& scores, MetricKind metric);
CoverageCurve sweep(const std::vector<BinReport>& reports, const LRwBinsModel& first,
                    const GbdtModel& second, const Dataset& val, MetricKind metric);

/// Largest-coverage prefix whose metric loss against the second stage is
/// within `tolerance`.
Allocation select_cutoff(const CoverageCurve& curve, double second_stage_metric, double tolerance);

/// Keeps only the allocated bins; every other row becomes a miss.
LRwBinsModel filter_model(const LRwBinsModel& first, const Allocation& allocation);

}  // namespace lrwb
