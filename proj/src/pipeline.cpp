#include "lrwb/pipeline.hpp"

#include <sstream>

#include "lrwb/automl.hpp"
#include "lrwb/binning.hpp"
#include "lrwb/error.hpp"
#include "lrwb/metrics.hpp"

namespace lrwb {

Dataset load_dataset(const std::filesystem::path& path, std::string_view label_column,
                     const std::optional<std::filesystem::path>& schema_path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::IoError, "no such file: " + path.string());
  FeatureSchema schema;
  if (schema_path) {
    schema = FeatureSchema::load(*schema_path);
  } else {
    auto beside = path;
    beside += ".schema";
    auto stem = path;
    stem.replace_extension(".schema");
    if (std::filesystem::exists(beside)) {
      schema = FeatureSchema::load(beside);
    } else if (std::filesystem::exists(stem)) {
      schema = FeatureSchema::load(stem);
    } else {
      schema = infer_schema(path, label_column);
    }
  }
  return load_csv(path, schema, label_column);
}

PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& config) {
  return run_pipeline(split(data, config.fractions, config.seed), config);
}

PipelineResult run_pipeline(DatasetSplit parts, const PipelineConfig& config) {
  if (config.b < 2) throw Error(Errc::InvalidArgument, "b must be >= 2");
  if (config.n < 0) throw Error(Errc::InvalidArgument, "n must be >= 0");
  PipelineResult r;
  r.split = std::move(parts);
  const Dataset& train = r.split.train;
  const Dataset& val = r.split.validation;
  if (val.rows() == 0) throw Error(Errc::InvalidArgument, "validation split is empty");

  GbdtParams gbdt = config.gbdt;
  gbdt.seed = config.seed;
  r.second = train_gbdt(train, gbdt);
  r.ranking = config.ranking == RankingMethod::Mrmr ? rank_mrmr(train) : rank_by_gain(r.second);

  const BinSpec spec = fit_bins(train, r.ranking, config.n, config.b);
  const auto features = top_features(r.ranking, config.m);
  r.lrwbins = train_lrwbins(train, spec, features, config.first);
  r.lrwbins.quantiles = config.b;
  r.plain_lr = train_plain_lr(train, features, config.first.lr);

  const StageScores scores = StageScores::compute(r.lrwbins, r.second, val);
  r.reports = evaluate_per_bin(scores, config.metric);
  r.curve = sweep(r.reports, scores, config.metric);
  r.allocation = select_cutoff(r.curve, r.curve.second_metric(), config.tolerance);
  r.first = filter_model(r.lrwbins, r.allocation);
  return r;
}

std::vector<double> score_hybrid(const LRwBinsModel& first, const GbdtModel& second, const Dataset& d) {
  std::vector<double> out(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto row = d.x.row(i);
    const auto p = first.predict(row);
    out[static_cast<std::size_t>(i)] = p ? *p : second.predict(row);
  }
  return out;
}

namespace {

ModelEval eval_scores(std::string name, const std::vector<double>& scores, const std::vector<int>& labels) {
  ModelEval e;
  e.model = std::move(name);
  e.n_rows = labels.size();
  e.accuracy = accuracy(scores, labels);
  e.roc_auc = roc_auc(scores, labels);
  return e;
}

}  // namespace

EvalReport evaluate(const LRwBinsModel& first, const GbdtModel& second, const Dataset& d) {
  const std::vector<int> labels(d.y.begin(), d.y.end());
  const Eigen::VectorXd g = second.predict(d);
  const std::vector<double> gbdt(g.begin(), g.end());

  std::vector<double> hybrid(gbdt), covered;
  std::vector<int> covered_labels;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (const auto p = first.predict(d.x.row(i))) {
      hybrid[static_cast<std::size_t>(i)] = *p;
      covered.push_back(*p);
      covered_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
  }

  EvalReport report;
  report.rows.push_back(eval_scores("gbdt", gbdt, labels));
  auto h = eval_scores("hybrid", hybrid, labels);
  h.coverage = labels.empty() ? 0.0 : static_cast<double>(covered.size()) / static_cast<double>(labels.size());
  h.delta_auc = report.rows[0].roc_auc - h.roc_auc;
  h.delta_acc = report.rows[0].accuracy - h.accuracy;
  report.rows.push_back(h);

  ModelEval c;
  c.model = "first_stage_covered";
  c.n_rows = covered.size();
  c.accuracy = accuracy(covered, covered_labels);
  const auto pos = std::count(covered_labels.begin(), covered_labels.end(), 1);
  c.roc_auc = (pos > 0 && pos < static_cast<long>(covered_labels.size())) ? roc_auc(covered, covered_labels)
                                                                           : std::nan("");
  c.coverage = h.coverage;
  report.rows.push_back(c);
  return report;
}

EvalReport evaluate(const PipelineResult& result, const Dataset& d) {
  const std::vector<int> labels(d.y.begin(), d.y.end());
  EvalReport report;
  std::vector<double> lr(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) lr[static_cast<std::size_t>(i)] = result.plain_lr.predict(d.x.row(i)).value_or(0.5);
  report.rows.push_back(eval_scores("lr", lr, labels));
  report.rows.push_back(eval_scores("lrwbins", score_standalone(result.lrwbins, result.plain_lr, d), labels));
  for (auto& row : evaluate(result.first, result.second, d).rows) report.rows.push_back(std::move(row));
  return report;
}

const ModelEval* EvalReport::find(std::string_view model) const {
  for (const auto& r : rows) {
    if (r.model == model) return &r;
  }
  return nullptr;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(6);
  os << "model,roc_auc,accuracy,n_rows,coverage,delta_auc,delta_acc\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& r : rows) {
    os << r.model << ',' << r.roc_auc << ',' << r.accuracy << ',' << r.n_rows << ',';
    opt(r.coverage);
    os << ',';
    opt(r.delta_auc);
    os << ',';
    opt(r.delta_acc);
    os << '\n';
  }
  return os.str();
}

}  // namespace lrwb
