#include "lrwb/allocation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "lrwb/error.hpp"

namespace lrwb {

namespace {

// Exact ROC AUC under single-row inserts and removals. Scores are known up
// front, so each one maps to a rank in a Fenwick tree per class; the doubled
// count of concordant pos/neg pairs (ties count 1) is kept as an integer.
class IncrementalAuc {
 public:
  explicit IncrementalAuc(std::vector<double> universe) : values_(std::move(universe)) {
    std::sort(values_.begin(), values_.end());
    values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
    pos_.assign(values_.size() + 1, 0);
    neg_.assign(values_.size() + 1, 0);
  }

  void insert(double score, bool positive) { update(score, positive, +1); }
  void remove(double score, bool positive) { update(score, positive, -1); }

  std::optional<double> value() const {
    if (n_pos_ == 0 || n_neg_ == 0) return std::nullopt;
    return static_cast<double>(doubled_) / (2.0 * static_cast<double>(n_pos_) * static_cast<double>(n_neg_));
  }

 private:
  std::size_t rank_of(double score) const {
    return static_cast<std::size_t>(std::lower_bound(values_.begin(), values_.end(), score) - values_.begin()) + 1;
  }

  static long long prefix(const std::vector<long long>& tree, std::size_t i) {
    long long s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  }

  static void add(std::vector<long long>& tree, std::size_t i, long long v) {
    for (; i < tree.size(); i += i & (~i + 1)) tree[i] += v;
  }

  void update(double score, bool positive, int sign) {
    const auto r = rank_of(score);
    if (positive) {
      const long long less = prefix(neg_, r - 1);
      const long long equal = prefix(neg_, r) - less;
      doubled_ += sign * (2 * less + equal);
      add(pos_, r, sign);
      n_pos_ += sign;
    } else {
      const long long upto = prefix(pos_, r);
      const long long equal = upto - prefix(pos_, r - 1);
      const long long greater = n_pos_ - upto;
      doubled_ += sign * (2 * greater + equal);
      add(neg_, r, sign);
      n_neg_ += sign;
    }
  }

  std::vector<double> values_;
  std::vector<long long> pos_;
  std::vector<long long> neg_;
  long long n_pos_ = 0;
  long long n_neg_ = 0;
  long long doubled_ = 0;
};

std::optional<double> metric_of(MetricKind kind, const std::vector<double>& scores, const std::vector<int>& labels) {
  if (kind == MetricKind::Accuracy) return accuracy(scores, labels);
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(labels.size())) return std::nullopt;
  return roc_auc(scores, labels);
}

std::map<BinId, std::vector<std::size_t>> rows_by_bin(const StageScores& scores) {
  std::map<BinId, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[scores.bins[i]].push_back(i);
  return out;
}

}  // namespace

StageScores StageScores::compute(const LRwBinsModel& first, const GbdtModel& second, const Dataset& d) {
  StageScores s;
  s.bins = assign_bins(d, first.spec);
  s.first = first.predict(d);
  const Eigen::VectorXd p = second.predict(d);
  s.second.assign(p.begin(), p.end());
  s.labels.assign(d.y.begin(), d.y.end());
  return s;
}

std::vector<BinReport> evaluate_per_bin(const StageScores& scores, MetricKind metric) {
  std::vector<BinReport> reports;
  std::vector<double> first, second;
  std::vector<int> labels;
  for (const auto& [bin, rows] : rows_by_bin(scores)) {
    BinReport r;
    r.bin = bin;
    r.rows = rows.size();
    const bool has_weights = scores.first[rows.front()].has_value();
    first.clear();
    second.clear();
    labels.clear();
    for (const auto i : rows) {
      if (has_weights) first.push_back(*scores.first[i]);
      second.push_back(scores.second[i]);
      labels.push_back(scores.labels[i]);
    }
    r.second_metric = metric_of(metric, second, labels);
    if (has_weights) r.first_metric = metric_of(metric, first, labels);
    if (r.first_metric && r.second_metric) r.delta = *r.second_metric - *r.first_metric;
    reports.push_back(r);
  }
  return reports;
}

std::vector<BinReport> evaluate_per_bin(const LRwBinsModel& first, const GbdtModel& second,
                                        const Dataset& val, MetricKind metric) {
  if (val.rows() == 0) throw Error(Errc::InvalidArgument, "validation set is empty");
  return evaluate_per_bin(StageScores::compute(first, second, val), metric);
}

CoverageCurve sweep(const std::vector<BinReport>& reports, const StageScores& scores, MetricKind metric) {
  std::vector<const BinReport*> eligible;
  for (const auto& r : reports) {
    if (r.eligible()) eligible.push_back(&r);
  }
  std::sort(eligible.begin(), eligible.end(), [](const BinReport* a, const BinReport* b) {
    if (a->delta != b->delta) return a->delta < b->delta;
    if (a->rows != b->rows) return a->rows > b->rows;
    return a->bin < b->bin;
  });

  CoverageCurve curve;
  curve.metric = metric;
  curve.total_rows = scores.size();
  for (const auto* r : eligible) curve.order.push_back(r->bin);

  const auto members = rows_by_bin(scores);
  std::vector<double> universe = scores.second;
  for (const auto& f : scores.first) {
    if (f) universe.push_back(*f);
  }
  IncrementalAuc hybrid_auc(universe);
  IncrementalAuc prefix_auc(universe);
  std::size_t hybrid_correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hybrid_auc.insert(scores.second[i], scores.labels[i] == 1);
    hybrid_correct += (scores.second[i] >= 0.5) == (scores.labels[i] == 1);
  }
  const double n = static_cast<double>(std::max<std::size_t>(scores.size(), 1));
  curve.second_accuracy = static_cast<double>(hybrid_correct) / n;
  curve.second_auc = hybrid_auc.value().value_or(std::nan(""));

  std::size_t covered = 0;
  std::size_t prefix_correct = 0;
  auto emit = [&](std::size_t k) {
    CurvePoint p;
    p.cut_index = k;
    p.covered_rows = covered;
    p.coverage = static_cast<double>(covered) / n;
    p.hybrid_accuracy = static_cast<double>(hybrid_correct) / n;
    p.hybrid_auc = hybrid_auc.value().value_or(std::nan(""));
    p.delta_vs_second = metric == MetricKind::Accuracy ? curve.second_accuracy - p.hybrid_accuracy
                                                       : curve.second_auc - p.hybrid_auc;
    if (covered > 0) {
      p.prefix_first_metric = metric == MetricKind::Accuracy
                                  ? std::optional<double>(static_cast<double>(prefix_correct) / static_cast<double>(covered))
                                  : prefix_auc.value();
    }
    curve.points.push_back(p);
  };

  emit(0);
  for (std::size_t k = 0; k < curve.order.size(); ++k) {
    for (const auto i : members.at(curve.order[k])) {
      const bool positive = scores.labels[i] == 1;
      const double first = *scores.first[i];
      hybrid_auc.remove(scores.second[i], positive);
      hybrid_auc.insert(first, positive);
      prefix_auc.insert(first, positive);
      const bool second_ok = (scores.second[i] >= 0.5) == positive;
      const bool first_ok = (first >= 0.5) == positive;
      hybrid_correct = hybrid_correct - second_ok + first_ok;
      prefix_correct += first_ok;
      ++covered;
    }
    emit(k + 1);
  }
  return curve;
}

CoverageCurve sweep(const std::vector<BinReport>& reports, const LRwBinsModel& first,
                    const GbdtModel& second, const Dataset& val, MetricKind metric) {
  return sweep(reports, StageScores::compute(first, second, val), metric);
}

Allocation select_cutoff(const CoverageCurve& curve, double second_stage_metric, double tolerance) {
  if (!(tolerance >= 0.0)) throw Error(Errc::InvalidArgument, "tolerance must be >= 0");
  Allocation a;
  a.tolerance = tolerance;
  a.metric = curve.metric;
  bool found = false;
  std::size_t pick = 0;
  for (const auto& p : curve.points) {
    const double hybrid = curve.metric == MetricKind::Accuracy ? p.hybrid_accuracy : p.hybrid_auc;
    const double loss = second_stage_metric - hybrid;
    if (!(loss <= tolerance + 1e-12)) continue;
    if (!found || p.coverage > curve.points[pick].coverage) {
      pick = p.cut_index;
      found = true;
    }
  }
  if (!found) return a;
  a.cut_index = pick;
  a.coverage = curve.points[pick].coverage;
  a.first_stage_bins.insert(curve.order.begin(), curve.order.begin() + static_cast<std::ptrdiff_t>(pick));
  return a;
}

LRwBinsModel filter_model(const LRwBinsModel& first, const Allocation& allocation) {
  LRwBinsModel out = first;
  std::erase_if(out.weights_by_bin, [&](const auto& kv) { return !allocation.first_stage_bins.contains(kv.first); });
  return out;
}

std::string CoverageCurve::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "cut_index,coverage,hybrid_accuracy,hybrid_auc,delta_vs_second,prefix_first_" << to_string(metric) << '\n';
  for (const auto& p : points) {
    os << p.cut_index << ',' << p.coverage << ',' << p.hybrid_accuracy << ',' << p.hybrid_auc << ','
       << p.delta_vs_second << ',';
    if (p.prefix_first_metric) os << *p.prefix_first_metric;
    os << '\n';
  }
  return os.str();
}

std::string Allocation::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "# metric=" << to_string(metric) << " tolerance=" << tolerance << " coverage=" << coverage
     << " cut_index=" << cut_index << '\n';
  for (const auto b : first_stage_bins) os << b << '\n';
  return os.str();
}

Allocation Allocation::parse(std::string_view text) {
  Allocation a;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string kv;
      while (meta >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto value = kv.substr(eq + 1);
        if (key == "metric") a.metric = value == "roc_auc" ? MetricKind::RocAuc : MetricKind::Accuracy;
        if (key == "tolerance") a.tolerance = std::stod(value);
        if (key == "coverage") a.coverage = std::stod(value);
        if (key == "cut_index") a.cut_index = std::stoul(value);
      }
      continue;
    }
    BinId bin = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), bin);
    if (ec != std::errc{}) throw Error(Errc::UnparseableValue, "bad bin id '" + line + "'");
    (void)ptr;
    a.first_stage_bins.insert(bin);
  }
  return a;
}

}  // namespace lrwb
