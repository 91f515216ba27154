#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lrwb/binning.hpp"
#include "lrwb/first_stage.hpp"
#include "lrwb/gbdt.hpp"

namespace lrwb {

inline constexpr std::uint16_t kFirstStageVersion = 1;
inline constexpr std::uint16_t kSecondStageVersion = 1;

/// First-stage serving engine built from a `.lrwb` table. It shares no code
/// with LRwBinsModel's scoring path: binning, input transform and weights
/// all run off the 32-bit table contents, and bins are found through an
/// open-addressing hash map.
class FirstStageTable {
 public:
  struct Binned {
    std::uint32_t feature = 0;
    FeatureKind kind = FeatureKind::Numeric;
    std::uint32_t cardinality = 0;
    std::vector<float> edges;
  };

  struct Input {
    std::uint32_t feature = 0;
    FeatureKind kind = FeatureKind::Numeric;
    float mean = 0.0f;
    float stddev = 1.0f;
    std::vector<float> code_values;
  };

  static FirstStageTable from_model(const LRwBinsModel& model);
  static FirstStageTable decode(std::span<const std::uint8_t> bytes);
  static FirstStageTable load(const std::filesystem::path& path);

  std::vector<std::uint8_t> encode() const;
  LRwBinsModel to_model() const;

  template <typename Derived>
  BinId bin_of(const Eigen::DenseBase<Derived>& row) const {
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < binned_.size(); ++i) index += digit(binned_[i], row(binned_[i].feature)) * strides_[i];
    return static_cast<BinId>(index);
  }

  /// Probability on a hit, nullopt on a miss.
  template <typename Derived>
  std::optional<double> predict(const Eigen::DenseBase<Derived>& row) const {
    const float* w = find(bin_of(row));
    if (w == nullptr) return std::nullopt;
    double z = static_cast<double>(w[0]);
    for (std::size_t k = 0; k < inputs_.size(); ++k) {
      z += static_cast<double>(w[k + 1]) * transform(inputs_[k], row(inputs_[k].feature));
    }
    return sigmoid(z);
  }

  std::optional<double> predict(std::span<const double> row) const {
    return predict(Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
  }

  /// Null when the bin is not in the table.
  const float* find(BinId bin) const noexcept;

  std::uint16_t n() const noexcept { return static_cast<std::uint16_t>(binned_.size()); }
  std::uint16_t b() const noexcept { return quantiles_; }
  std::uint16_t m() const noexcept { return static_cast<std::uint16_t>(inputs_.size()); }
  std::uint32_t total_bins() const noexcept { return total_bins_; }
  std::size_t entries() const noexcept { return bins_.size(); }
  const std::vector<Binned>& binned() const noexcept { return binned_; }
  const std::vector<Input>& inputs() const noexcept { return inputs_; }
  const std::vector<std::uint32_t>& bins() const noexcept { return bins_; }

 private:
  static std::uint32_t digit(const Binned& f, double v) noexcept;
  static double transform(const Input& f, double raw) noexcept;
  void build_index();

  std::uint16_t quantiles_ = 0;
  std::uint32_t total_bins_ = 1;
  std::vector<Binned> binned_;
  std::vector<std::uint64_t> strides_;
  std::vector<Input> inputs_;
  std::vector<std::uint32_t> bins_;  // sorted
  std::vector<float> weights_;       // (1 + m) per entry, bias first
  std::vector<std::uint32_t> slots_; // open addressing, entry index + 1, 0 = empty
};

/// Bytes of the quantile section for a given bin layout: per feature a fixed
/// 11-byte descriptor plus 4 bytes per edge.
std::size_t quantile_section_bytes(const BinSpec& spec);

/// Writes the filtered model as a `.lrwb` table and returns its size.
std::size_t export_first_stage(const LRwBinsModel& model, const std::filesystem::path& path);
/// Inference-only model: weights widened from the stored 32-bit values.
LRwBinsModel import_first_stage(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_second_stage(const GbdtModel& model);
GbdtModel decode_second_stage(std::span<const std::uint8_t> bytes);
std::size_t export_second_stage(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel import_second_stage(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lrwb
