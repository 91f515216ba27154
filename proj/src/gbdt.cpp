#include "lrwb/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lrwb/error.hpp"

namespace lrwb {

void GbdtParams::validate() const {
  if (num_trees < 0) throw Error(Errc::InvalidArgument, "num_trees must be >= 0");
  if (max_depth < 1) throw Error(Errc::InvalidArgument, "max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw Error(Errc::InvalidArgument, "learning_rate must be in (0, 1]");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw Error(Errc::InvalidArgument, "subsample must be in (0, 1]");
  if (min_child_rows < 1) throw Error(Errc::InvalidArgument, "min_child_rows must be >= 1");
  if (l2_leaf < 0.0) throw Error(Errc::InvalidArgument, "l2_leaf must be >= 0");
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  // Children always follow their parent in `nodes`.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

void GbdtModel::check_width(Eigen::Index width) const {
  if (static_cast<std::size_t>(width) != schema.size()) {
    throw Error(Errc::SchemaMismatch, "row has " + std::to_string(width) + " features, model expects " +
                                          std::to_string(schema.size()));
  }
}

Eigen::VectorXd GbdtModel::predict(const Dataset& d) const {
  if (d.schema.fingerprint() != schema.fingerprint()) {
    throw Error(Errc::SchemaMismatch, "dataset schema differs from the model schema");
  }
  Eigen::VectorXd out(d.rows());
  for (Eigen::Index i = 0; i < d.rows(); ++i) out(i) = sigmoid(margin(d.x.row(i)));
  return out;
}

std::vector<double> GbdtModel::feature_gain() const {
  std::vector<double> gain(schema.size(), 0.0);
  for (const auto& t : trees) {
    for (const auto& node : t.nodes) {
      if (!node.is_leaf()) gain[static_cast<std::size_t>(node.feature)] += node.gain;
    }
  }
  return gain;
}

namespace {

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  std::size_t count = 0;
};

struct Candidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
  bool categorical = false;
};

double mean_log_loss(const Eigen::VectorXd& margin, const Eigen::VectorXi& y) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) {
    const double z = margin(i);
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - y(i) * z;
  }
  return loss / static_cast<double>(margin.size());
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, const std::vector<std::vector<Eigen::Index>>& sorted, const GbdtParams& params)
      : d_(d), sorted_(sorted), params_(params) {}

  RegressionTree build(const Eigen::VectorXd& g, const Eigen::VectorXd& h, const std::vector<char>& sampled) {
    const auto n = static_cast<std::size_t>(d_.rows());
    node_of_.assign(n, -1);
    RegressionTree tree;
    tree.nodes.emplace_back();
    NodeStats root;
    for (std::size_t i = 0; i < n; ++i) {
      if (!sampled[i]) continue;
      node_of_[i] = 0;
      root.g += g(static_cast<Eigen::Index>(i));
      root.h += h(static_cast<Eigen::Index>(i));
      ++root.count;
    }
    std::vector<std::int32_t> open{0};
    std::vector<NodeStats> stats{root};

    for (int depth = 0; depth < params_.max_depth && !open.empty(); ++depth) {
      slot_of_.assign(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < open.size(); ++s) slot_of_[static_cast<std::size_t>(open[s])] = static_cast<std::int32_t>(s);

      std::vector<Candidate> best(open.size());
      for (Eigen::Index j = 0; j < d_.features(); ++j) {
        if (d_.schema[static_cast<std::size_t>(j)].kind == FeatureKind::Categorical) {
          scan_categorical(j, g, h, stats, best);
        } else {
          scan_ordered(j, g, h, stats, best);
        }
      }

      std::vector<std::int32_t> next_open;
      std::vector<NodeStats> next_stats;
      bool any_split = false;
      for (std::size_t s = 0; s < open.size(); ++s) {
        const auto id = open[s];
        const auto& c = best[s];
        if (c.feature < 0 || !(c.gain > 0.0)) {
          make_leaf(tree.nodes[static_cast<std::size_t>(id)], stats[s]);
          continue;
        }
        any_split = true;
        auto left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.kind = c.categorical ? TreeNode::Kind::CategoricalSplit : TreeNode::Kind::NumericSplit;
        node.feature = c.feature;
        node.threshold = c.threshold;
        node.gain = c.gain;
        node.left = left;
        node.right = left + 1;
        next_open.push_back(left);
        next_open.push_back(left + 1);
        next_stats.emplace_back();
        next_stats.emplace_back();
      }
      if (!any_split) {
        open.clear();
        break;
      }

      // Route sampled rows of split nodes to their children.
      std::vector<std::int32_t> child_slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < next_open.size(); ++s) child_slot[static_cast<std::size_t>(next_open[s])] = static_cast<std::int32_t>(s);
      for (std::size_t i = 0; i < n; ++i) {
        const auto at = node_of_[i];
        if (at < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(at)];
        if (node.is_leaf()) {
          node_of_[i] = -1;
          continue;
        }
        const double v = d_.x(static_cast<Eigen::Index>(i), node.feature);
        const bool go_left = node.kind == TreeNode::Kind::NumericSplit ? v < node.threshold : v == node.threshold;
        const auto child = go_left ? node.left : node.right;
        node_of_[i] = child;
        auto& st = next_stats[static_cast<std::size_t>(child_slot[static_cast<std::size_t>(child)])];
        st.g += g(static_cast<Eigen::Index>(i));
        st.h += h(static_cast<Eigen::Index>(i));
        ++st.count;
      }
      open = std::move(next_open);
      stats = std::move(next_stats);
    }
    for (std::size_t s = 0; s < open.size(); ++s) make_leaf(tree.nodes[static_cast<std::size_t>(open[s])], stats[s]);
    return tree;
  }

 private:
  double score(double g, double h) const { return g * g / (h + params_.l2_leaf); }

  double split_gain(const NodeStats& left, const NodeStats& total) const {
    return 0.5 * (score(left.g, left.h) + score(total.g - left.g, total.h - left.h) - score(total.g, total.h));
  }

  bool children_large_enough(std::size_t left, std::size_t total) const {
    const auto min_rows = static_cast<std::size_t>(params_.min_child_rows);
    return left >= min_rows && total - left >= min_rows;
  }

  void make_leaf(TreeNode& node, const NodeStats& st) const {
    node.kind = TreeNode::Kind::Leaf;
    node.value = -st.g / (st.h + params_.l2_leaf) * params_.learning_rate;
  }

  void scan_ordered(Eigen::Index j, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                    const std::vector<NodeStats>& stats, std::vector<Candidate>& best) const {
    std::vector<NodeStats> acc(stats.size());
    std::vector<double> last(stats.size(), 0.0);
    for (const auto i : sorted_[static_cast<std::size_t>(j)]) {
      const auto at = node_of_[static_cast<std::size_t>(i)];
      if (at < 0) continue;
      const auto s = slot_of_[static_cast<std::size_t>(at)];
      if (s < 0) continue;
      auto& a = acc[static_cast<std::size_t>(s)];
      const double v = d_.x(i, j);
      if (a.count > 0 && v != last[static_cast<std::size_t>(s)] &&
          children_large_enough(a.count, stats[static_cast<std::size_t>(s)].count)) {
        const double gain = split_gain(a, stats[static_cast<std::size_t>(s)]);
        auto& b = best[static_cast<std::size_t>(s)];
        if (gain > b.gain) {
          const double lo = last[static_cast<std::size_t>(s)];
          double mid = lo + (v - lo) * 0.5;
          if (!(mid > lo)) mid = v;
          b = Candidate{gain, static_cast<std::int32_t>(j), mid, false};
        }
      }
      a.g += g(i);
      a.h += h(i);
      ++a.count;
      last[static_cast<std::size_t>(s)] = v;
    }
  }

  void scan_categorical(Eigen::Index j, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                        const std::vector<NodeStats>& stats, std::vector<Candidate>& best) const {
    const std::size_t codes = d_.schema[static_cast<std::size_t>(j)].cardinality + 1;
    std::vector<NodeStats> acc(stats.size() * codes);
    for (Eigen::Index i = 0; i < d_.rows(); ++i) {
      const auto at = node_of_[static_cast<std::size_t>(i)];
      if (at < 0) continue;
      const auto s = slot_of_[static_cast<std::size_t>(at)];
      if (s < 0) continue;
      const double v = d_.x(i, j);
      const std::size_t code = (v >= 0.0 && v < static_cast<double>(codes - 1)) ? static_cast<std::size_t>(v) : codes - 1;
      auto& a = acc[static_cast<std::size_t>(s) * codes + code];
      a.g += g(i);
      a.h += h(i);
      ++a.count;
    }
    for (std::size_t s = 0; s < stats.size(); ++s) {
      for (std::size_t k = 0; k < codes; ++k) {
        const auto& a = acc[s * codes + k];
        if (!children_large_enough(a.count, stats[s].count)) continue;
        const double gain = split_gain(a, stats[s]);
        if (gain > best[s].gain) best[s] = Candidate{gain, static_cast<std::int32_t>(j), static_cast<double>(k), true};
      }
    }
  }

  const Dataset& d_;
  const std::vector<std::vector<Eigen::Index>>& sorted_;
  const GbdtParams& params_;
  std::vector<std::int32_t> node_of_;
  std::vector<std::int32_t> slot_of_;
};

}  // namespace

GbdtModel train_gbdt(const Dataset& train, const GbdtParams& params) {
  params.validate();
  const auto n = train.rows();
  if (n < 2) throw Error(Errc::SingleClassDataset, "GBDT training needs at least two rows");
  const auto positives = train.y.sum();
  if (positives == 0 || positives == n) throw Error(Errc::SingleClassDataset, "GBDT training needs both classes");
  if (!train.x.allFinite()) throw Error(Errc::NonFiniteInput, "non-finite GBDT training input");

  GbdtModel model;
  model.schema = train.schema;
  model.categories = train.categories;
  model.base_score = logit(std::clamp(train.positive_rate(), kSingleClassClamp, 1.0 - kSingleClassClamp));

  std::vector<std::vector<Eigen::Index>> sorted(static_cast<std::size_t>(train.features()));
  for (Eigen::Index j = 0; j < train.features(); ++j) {
    if (train.schema[static_cast<std::size_t>(j)].kind == FeatureKind::Categorical) continue;
    auto& order = sorted[static_cast<std::size_t>(j)];
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return train.x(a, j) < train.x(b, j); });
  }

  Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, model.base_score);
  Eigen::VectorXd g(n), h(n);
  std::vector<char> sampled(static_cast<std::size_t>(n), 1);
  model.train_loss.push_back(mean_log_loss(margin, train.y));
  TreeBuilder builder(train, sorted, params);

  for (int t = 0; t < params.num_trees; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(margin(i));
      g(i) = p - train.y(i);
      h(i) = p * (1.0 - p);
    }
    if (params.subsample < 1.0) {
      std::mt19937_64 rng(params.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(t));
      for (auto& s : sampled) s = static_cast<double>(rng() >> 11) * 0x1.0p-53 < params.subsample;
    }
    model.trees.push_back(builder.build(g, h, sampled));
    const auto& tree = model.trees.back();
    for (Eigen::Index i = 0; i < n; ++i) margin(i) += tree.predict(train.x.row(i));
    model.train_loss.push_back(mean_log_loss(margin, train.y));
  }
  return model;
}

}  // namespace lrwb
