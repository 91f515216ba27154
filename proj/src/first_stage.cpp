#include "lrwb/first_stage.hpp"

#include <cmath>
#include <unordered_map>

#include "lrwb/error.hpp"
#include "lrwb/feature_ranking.hpp"

namespace lrwb {

namespace {

double float_exact(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

double InferenceFeature::encode(double raw) const noexcept {
  if (kind != FeatureKind::Categorical) return raw;
  const auto unknown = code_values.size() - 1;
  if (raw >= 0.0 && raw < static_cast<double>(unknown) && raw == std::floor(raw)) {
    return code_values[static_cast<std::size_t>(raw)];
  }
  return code_values[unknown];
}

InputTransform InputTransform::fit(const Dataset& train, std::span<const Eigen::Index> features) {
  const Normalizer normalizer = Normalizer::fit(train).quantized();
  const double n = static_cast<double>(train.rows());
  std::vector<InferenceFeature> out;
  out.reserve(features.size());
  for (const auto j : features) {
    if (j < 0 || j >= train.features()) throw Error(Errc::InvalidArgument, "inference feature out of range");
    const auto& spec = train.schema[static_cast<std::size_t>(j)];
    InferenceFeature f;
    f.feature = j;
    f.kind = spec.kind;
    switch (spec.kind) {
      case FeatureKind::Numeric:
        f.mean = normalizer.mean()[static_cast<std::size_t>(j)];
        f.stddev = normalizer.stddev()[static_cast<std::size_t>(j)];
        break;
      case FeatureKind::Boolean:
        break;
      case FeatureKind::Categorical: {
        const std::size_t card = spec.cardinality;
        std::vector<double> pos(card + 1, 0.0), neg(card + 1, 0.0);
        double total_pos = 0.0;
        const auto col = train.x.col(j);
        for (Eigen::Index i = 0; i < col.size(); ++i) {
          const double v = col(i);
          const std::size_t code = (v >= 0.0 && v < static_cast<double>(card)) ? static_cast<std::size_t>(v) : card;
          (train.y(i) ? pos : neg)[code] += 1.0;
          total_pos += train.y(i);
        }
        f.code_values.resize(card + 1);
        for (std::size_t k = 0; k < card; ++k) f.code_values[k] = float_exact(std::log((pos[k] + 1.0) / (neg[k] + 1.0)));
        f.code_values[card] = float_exact(std::log((total_pos + 1.0) / (n - total_pos + 1.0)));
        double mean = 0.0, sq = 0.0;
        for (Eigen::Index i = 0; i < col.size(); ++i) {
          const double e = f.encode(col(i));
          mean += e;
          sq += e * e;
        }
        if (n > 0) {
          mean /= n;
          const double var = std::max(0.0, sq / n - mean * mean);
          f.mean = float_exact(mean);
          f.stddev = float_exact(std::max(std::sqrt(var), 1e-6));
        }
        break;
      }
    }
    out.push_back(std::move(f));
  }
  return InputTransform(std::move(out));
}

Eigen::MatrixXd InputTransform::apply(const Dataset& d) const {
  Eigen::MatrixXd out(d.rows(), size());
  for (Eigen::Index c = 0; c < size(); ++c) {
    const auto& f = features_[static_cast<std::size_t>(c)];
    const auto col = d.x.col(f.feature);
    for (Eigen::Index i = 0; i < d.rows(); ++i) out(i, c) = f.transform(col(i));
  }
  return out;
}

std::vector<std::optional<double>> LRwBinsModel::predict(const Dataset& d) const {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(d.x.row(i));
  return out;
}

std::vector<Eigen::Index> top_features(const FeatureRanking& ranking, int m) {
  const auto total = ranking.order.size();
  const std::size_t count = (m <= 0 || static_cast<std::size_t>(m) > total) ? total : static_cast<std::size_t>(m);
  std::vector<Eigen::Index> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(ranking.order[i].feature);
  return out;
}

LRwBinsModel train_lrwbins(const Dataset& train, const BinSpec& spec,
                           std::span<const Eigen::Index> inference_features,
                           const FirstStageParams& params) {
  if (inference_features.empty()) throw Error(Errc::InvalidArgument, "no inference features");
  if (train.rows() == 0) throw Error(Errc::EmptyTrainingSet, "cannot train on zero rows");
  if (params.min_bin_rows < 1) throw Error(Errc::InvalidArgument, "min_bin_rows must be >= 1");

  LRwBinsModel model;
  model.spec = spec;
  model.inputs = InputTransform::fit(train, inference_features);
  model.min_bin_rows = params.min_bin_rows;

  const Eigen::MatrixXd z = model.inputs.apply(train);
  std::map<BinId, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < train.rows(); ++i) members[spec.bin_of(train.x.row(i))].push_back(i);

  for (const auto& [bin, rows] : members) {
    model.train_rows[bin] = rows.size();
    if (rows.size() < static_cast<std::size_t>(params.min_bin_rows)) continue;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), z.cols());
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      x.row(r) = z.row(rows[static_cast<std::size_t>(r)]);
      y(r) = train.y(rows[static_cast<std::size_t>(r)]);
    }
    model.weights_by_bin.emplace(bin, train_lr(x, y, params.lr));
  }
  return model;
}

LRwBinsModel train_plain_lr(const Dataset& train, std::span<const Eigen::Index> inference_features,
                            const LrParams& params) {
  return train_lrwbins(train, BinSpec{}, inference_features, FirstStageParams{params, 1});
}

}  // namespace lrwb
