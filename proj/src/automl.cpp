#include "lrwb/automl.hpp"

#include <cmath>
#include <sstream>

#include "lrwb/binning.hpp"
#include "lrwb/error.hpp"
#include "lrwb/metrics.hpp"

namespace lrwb {

void TuneGrid::validate() const {
  if (b_values.empty() || n_values.empty() || m_values.empty()) throw Error(Errc::InvalidArgument, "tune grid is empty");
  for (const int b : b_values) {
    if (b < 2) throw Error(Errc::InvalidArgument, "b must be >= 2");
  }
  for (const int n : n_values) {
    if (n < 1) throw Error(Errc::InvalidArgument, "n must be >= 1");
  }
  for (const int m : m_values) {
    if (m < 0) throw Error(Errc::InvalidArgument, "m must be >= 0 (0 = all)");
  }
  if (bin_budget < 1) throw Error(Errc::InvalidArgument, "bin_budget must be >= 1");
}

double TuneCell::objective_value(const TuneObjective& objective) const {
  if (objective.kind == TuneObjective::Kind::MaxAuc) return val_roc_auc;
  return coverage_at_tolerance.value_or(-1.0);
}

std::vector<double> score_standalone(const LRwBinsModel& model, const LRwBinsModel& fallback, const Dataset& d) {
  std::vector<double> out(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto row = d.x.row(i);
    auto p = model.predict(row);
    if (!p) p = fallback.predict(row);
    out[static_cast<std::size_t>(i)] = p.value_or(0.5);
  }
  return out;
}

TuneResult tune(const Dataset& train, const Dataset& val, const FeatureRanking& ranking,
                const TuneGrid& grid, const TuneObjective& objective,
                const GbdtModel* second, const FirstStageParams& params) {
  grid.validate();
  if (objective.kind == TuneObjective::Kind::MaxCoverageAtTolerance && second == nullptr) {
    throw Error(Errc::InvalidArgument, "coverage objective needs a second-stage model");
  }
  const std::vector<int> labels(val.y.begin(), val.y.end());

  std::optional<StageScores> base;
  if (second) {
    base.emplace();
    const Eigen::VectorXd p = second->predict(val);
    base->second.assign(p.begin(), p.end());
    base->labels = labels;
  }

  TuneResult result;
  result.objective = objective;
  std::map<int, LRwBinsModel> fallbacks;  // plain LR per m
  bool any = false;
  for (const int b : grid.b_values) {
    for (const int n : grid.n_values) {
      const BinSpec spec = fit_bins(train, ranking, n, b);
      for (const int m : grid.m_values) {
        TuneCell cell;
        cell.b = b;
        cell.n = n;
        cell.m = m;
        cell.total_bins = spec.total_bins();
        if (cell.total_bins > grid.bin_budget) {
          cell.skipped = true;
          result.cells.push_back(cell);
          continue;
        }
        const auto features = top_features(ranking, m);
        auto fb = fallbacks.find(m);
        if (fb == fallbacks.end()) fb = fallbacks.emplace(m, train_plain_lr(train, features, params.lr)).first;
        const LRwBinsModel model = train_lrwbins(train, spec, features, params);
        cell.trained_bins = model.weights_by_bin.size();
        const auto scores = score_standalone(model, fb->second, val);
        cell.val_roc_auc = roc_auc(scores, labels);
        cell.val_accuracy = accuracy(scores, labels);
        if (base) {
          StageScores s = *base;
          s.bins = assign_bins(val, spec);
          s.first = model.predict(val);
          const auto reports = evaluate_per_bin(s, objective.metric);
          const auto curve = sweep(reports, s, objective.metric);
          cell.coverage_at_tolerance = select_cutoff(curve, curve.second_metric(), objective.tolerance).coverage;
        }
        result.cells.push_back(cell);

        if (!any) {
          result.winner = result.cells.size() - 1;
          any = true;
          continue;
        }
        const TuneCell& w = result.cells[result.winner];
        const double a = cell.objective_value(objective);
        const double bw = w.objective_value(objective);
        const int cell_m = m == 0 ? static_cast<int>(ranking.order.size()) : m;
        const int best_m = w.m == 0 ? static_cast<int>(ranking.order.size()) : w.m;
        if (a > bw || (a == bw && (cell.total_bins < w.total_bins ||
                                   (cell.total_bins == w.total_bins && cell_m < best_m)))) {
          result.winner = result.cells.size() - 1;
        }
      }
    }
  }
  if (!any) throw Error(Errc::EmptyGridAfterBudget, "every grid cell exceeds the bin budget");
  return result;
}

std::string TuneResult::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "b,n,m,total_bins,skipped,trained_bins,val_roc_auc,val_accuracy,coverage_at_tolerance,winner\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    os << c.b << ',' << c.n << ',' << c.m << ',' << c.total_bins << ',' << (c.skipped ? 1 : 0) << ',';
    if (!c.skipped) {
      os << c.trained_bins << ',' << c.val_roc_auc << ',' << c.val_accuracy << ',';
      if (c.coverage_at_tolerance) os << *c.coverage_at_tolerance;
    } else {
      os << ",,,";
    }
    os << ',' << (i == winner ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace lrwb
