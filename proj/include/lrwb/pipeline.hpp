#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrwb/allocation.hpp"
#include "lrwb/dataset.hpp"
#include "lrwb/feature_ranking.hpp"
#include "lrwb/first_stage.hpp"
#include "lrwb/gbdt.hpp"

namespace lrwb {

struct PipelineConfig {
  SplitFractions fractions;
  std::uint64_t seed = 0;
  int b = 3;
  int n = 7;
  int m = 20;
  double tolerance = 0.002;
  MetricKind metric = MetricKind::Accuracy;
  RankingMethod ranking = RankingMethod::GbdtGain;
  GbdtParams gbdt;
  FirstStageParams first;
};

/// Everything the two training algorithms produce, kept for evaluation.
struct PipelineResult {
  DatasetSplit split;
  GbdtModel second;
  FeatureRanking ranking;
  LRwBinsModel lrwbins;   // every trained bin
  LRwBinsModel plain_lr;  // single bin, same inference features
  std::vector<BinReport> reports;
  CoverageCurve curve;
  Allocation allocation;
  LRwBinsModel first;     // filtered to the allocation
};

/// Loads `path` with the schema from `schema_path`, or from `<path>.schema`
/// / `<stem>.schema` next to it, or inferred from the data when neither exists.
Dataset load_dataset(const std::filesystem::path& path, std::string_view label_column,
                     const std::optional<std::filesystem::path>& schema_path = std::nullopt);

/// Split, train the GBDT, rank features, fit bins, train LRwBins, allocate
/// bins on validation and filter.
PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& config);
PipelineResult run_pipeline(DatasetSplit split, const PipelineConfig& config);

struct ModelEval {
  std::string model;
  double roc_auc = 0.0;
  double accuracy = 0.0;
  std::size_t n_rows = 0;
  std::optional<double> coverage;
  std::optional<double> delta_auc;  // gbdt - hybrid
  std::optional<double> delta_acc;
};

struct EvalReport {
  std::vector<ModelEval> rows;

  const ModelEval* find(std::string_view model) const;
  std::string to_csv() const;
};

/// Hybrid routing: the first stage on a hit, the GBDT otherwise.
std::vector<double> score_hybrid(const LRwBinsModel& first, const GbdtModel& second, const Dataset& d);

/// GBDT, hybrid and covered-rows-only first-stage metrics on `d`.
EvalReport evaluate(const LRwBinsModel& first, const GbdtModel& second, const Dataset& d);
/// The above plus plain LR and unfiltered LRwBins (misses scored by the plain LR).
EvalReport evaluate(const PipelineResult& result, const Dataset& d);

}  // namespace lrwb
