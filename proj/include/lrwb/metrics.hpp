#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "lrwb/error.hpp"

namespace lrwb {

/// Area under the ROC curve via the Mann-Whitney rank statistic, with tied
/// scores sharing their average rank (each tied pos/neg pair counts 1/2).
/// Throws SingleClass when either class is absent.
template <typename Score, typename Label>
double roc_auc(std::span<const Score> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::InvalidArgument, "scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (const auto l : labels) positives += l != Label(0);
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw Error(Errc::SingleClass, "ROC AUC needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (doubled) 1-based ranks of the positives; doubling keeps ties exact.
  double doubled_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double doubled_avg_rank = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j)/2
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != Label(0)) doubled_rank_sum += doubled_avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double doubled_u = doubled_rank_sum - p * (p + 1.0);
  return doubled_u / (2.0 * p * static_cast<double>(negatives));
}

template <typename Score, typename Label>
double roc_auc(const std::vector<Score>& scores, const std::vector<Label>& labels) {
  return roc_auc(std::span<const Score>(scores), std::span<const Label>(labels));
}

/// Fraction of rows where (score >= threshold) matches the label.
template <typename Score, typename Label>
double accuracy(std::span<const Score> scores, std::span<const Label> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) throw Error(Errc::InvalidArgument, "scores/labels length mismatch");
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    correct += (static_cast<double>(scores[i]) >= threshold) == (labels[i] != Label(0));
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

template <typename Score, typename Label>
double accuracy(const std::vector<Score>& scores, const std::vector<Label>& labels, double threshold = 0.5) {
  return accuracy(std::span<const Score>(scores), std::span<const Label>(labels), threshold);
}

enum class MetricKind { Accuracy, RocAuc };

std::string_view to_string(MetricKind kind) noexcept;

}  // namespace lrwb
