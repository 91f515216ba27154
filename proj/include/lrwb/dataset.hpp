#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace lrwb {

enum class FeatureKind : std::uint8_t { Numeric = 0, Boolean = 1, Categorical = 2 };

std::string_view to_string(FeatureKind kind) noexcept;

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  // Categorical only. Code `cardinality` itself is the reserved UNKNOWN code.
  // A parsed schema may leave it at 0, meaning "count the distinct values at load".
  std::uint32_t cardinality = 0;

  bool operator==(const FeatureSpec&) const = default;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureSpec> features);

  /// Parses the sidecar format: one `name=kind` per line, where kind is
  /// `numeric`, `boolean` or `categorical[:K]`. Blank lines and `#` comments
  /// are skipped.
  static FeatureSchema parse(std::string_view text);
  static FeatureSchema load(const std::filesystem::path& path);
  std::string to_text() const;

  std::size_t size() const noexcept { return features_.size(); }
  const FeatureSpec& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<FeatureSpec>& features() const noexcept { return features_; }
  std::optional<std::size_t> find(std::string_view name) const;

  /// FNV-1a over names, kinds and cardinalities.
  std::uint64_t fingerprint() const noexcept;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureSpec> features_;
};

/// Per-feature code -> original string. Empty for non-categorical features.
using CategoryDictionary = std::vector<std::vector<std::string>>;

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowView = Eigen::Ref<const Eigen::RowVectorXd>;

struct Dataset {
  FeatureMatrix x;
  Eigen::VectorXi y;
  FeatureSchema schema;
  CategoryDictionary categories;

  Eigen::Index rows() const noexcept { return x.rows(); }
  Eigen::Index features() const noexcept { return x.cols(); }
  RowView row(Eigen::Index i) const { return x.row(i); }

  Dataset take(std::span<const Eigen::Index> indices) const;
  double positive_rate() const;

  /// Throws BadSchema / NonBinaryLabel when the invariants do not hold.
  void validate() const;
};

/// Reads a comma-separated file with a header row. When `dictionary` is given,
/// categorical strings are mapped through it and unseen ones become UNKNOWN;
/// otherwise codes are assigned in first-seen order.
Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                 std::string_view label_column,
                 const CategoryDictionary* dictionary = nullptr);

/// Every non-label column becomes Numeric unless one of its values fails to
/// parse as a number, in which case it is Categorical.
FeatureSchema infer_schema(const std::filesystem::path& path, std::string_view label_column);

/// Splits one comma-separated record; double quotes with "" escapes are
/// honoured and fields are trimmed.
std::vector<std::string> split_csv_record(std::string_view line);

/// Encodes one raw CSV-style record (schema order) into a feature row.
Eigen::RowVectorXd encode_row(std::span<const std::string> fields, const FeatureSchema& schema,
                              const CategoryDictionary& dictionary);

struct SplitFractions {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Deterministic shuffle under `seed`; validation and test sizes are
/// floor(N * fraction) and the remainder goes to train.
DatasetSplit split(const Dataset& d, SplitFractions fractions, std::uint64_t seed);

/// Standardizes Numeric features with training statistics (population
/// standard deviation, floored at 1e-12). Other kinds pass through.
class Normalizer {
 public:
  static constexpr double kStddevFloor = 1e-12;

  Normalizer() = default;
  Normalizer(std::vector<double> mean, std::vector<double> stddev);

  static Normalizer fit(const Dataset& train);

  Dataset apply(const Dataset& d) const;
  double transform(std::size_t feature, double value) const {
    return (value - mean_[feature]) / stddev_[feature];
  }

  /// Copy whose parameters are exactly representable as 32-bit floats.
  Normalizer quantized() const;

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return stddev_; }

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

}  // namespace lrwb
