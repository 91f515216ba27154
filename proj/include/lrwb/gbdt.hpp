#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lrwb/dataset.hpp"
#include "lrwb/logistic.hpp"

namespace lrwb {

struct GbdtParams {
  int num_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_child_rows = 20;
  double l2_leaf = 1.0;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  enum class Kind : std::uint8_t { Leaf = 0, NumericSplit = 1, CategoricalSplit = 2 };

  Kind kind = Kind::Leaf;
  std::int32_t feature = -1;
  // Numeric: rows with value < threshold go left.
  // Categorical: rows whose code equals threshold go left.
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
  double gain = 0.0;   // split gain, 0 for leaves

  bool is_leaf() const noexcept { return kind == Kind::Leaf; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Derived>
  std::int32_t leaf_of(const Eigen::DenseBase<Derived>& row) const {
    std::int32_t at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(at)];
      const double v = row(node.feature);
      const bool left = node.kind == TreeNode::Kind::NumericSplit ? v < node.threshold : v == node.threshold;
      at = left ? node.left : node.right;
    }
    return at;
  }

  template <typename Derived>
  double predict(const Eigen::DenseBase<Derived>& row) const {
    return nodes[static_cast<std::size_t>(leaf_of(row))].value;
  }

  int depth() const;
  bool operator==(const RegressionTree&) const = default;
};

/// Boosted ensemble with a logistic link.
struct GbdtModel {
  std::vector<RegressionTree> trees;
  double base_score = 0.0;  // prior log-odds
  FeatureSchema schema;
  CategoryDictionary categories;
  /// Mean training log-loss before the first tree and after each one.
  /// Not serialized.
  std::vector<double> train_loss;

  template <typename Derived>
  double margin(const Eigen::DenseBase<Derived>& row) const {
    double z = base_score;
    for (const auto& t : trees) z += t.predict(row);
    return z;
  }

  /// Throws SchemaMismatch when the row width differs from the schema.
  template <typename Derived>
  double predict(const Eigen::DenseBase<Derived>& row) const {
    check_width(row.size());
    return sigmoid(margin(row));
  }

  Eigen::VectorXd predict(const Dataset& d) const;

  /// Total split gain per feature over all trees.
  std::vector<double> feature_gain() const;

  void check_width(Eigen::Index width) const;
};

/// Newton boosting on logistic loss with exact greedy splits.
GbdtModel train_gbdt(const Dataset& train, const GbdtParams& params = {});

inline double predict_gbdt(const GbdtModel& model, RowView row) { return model.predict(row); }

}  // namespace lrwb
