#include "lrwb/metrics.hpp"

namespace lrwb {

std::string_view to_string(MetricKind kind) noexcept {
  return kind == MetricKind::Accuracy ? "accuracy" : "roc_auc";
}

}  // namespace lrwb
