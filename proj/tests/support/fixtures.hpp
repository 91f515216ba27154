#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "lrwb/dataset.hpp"
#include "lrwb/logistic.hpp"

namespace lrwb::testing {

inline Dataset make_dataset(const FeatureMatrix& x, const Eigen::VectorXi& y, std::vector<FeatureSpec> specs) {
  Dataset d;
  d.x = x;
  d.y = y;
  d.schema = FeatureSchema(std::move(specs));
  d.categories.resize(d.schema.size());
  for (std::size_t j = 0; j < d.schema.size(); ++j) {
    if (d.schema[j].kind == FeatureKind::Categorical) {
      for (std::uint32_t k = 0; k < d.schema[j].cardinality; ++k) d.categories[j].push_back("c" + std::to_string(k));
    }
  }
  return d;
}

// Tabular data with a regime structure: the label's linear dependence on x1
// and x4 flips with the sign of x0 and with the categorical x3, so per-bin
// linear models beat one global linear model and trees beat both.
//   x0 numeric N(0,1), x1 numeric U(-2,2), x2 boolean, x3 categorical(5),
//   x4 numeric N(0,1), x5 numeric noise.
inline Dataset synthetic(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  std::uniform_real_distribution<double> unit;
  std::uniform_int_distribution<int> cat(0, 4);
  FeatureMatrix x(static_cast<Eigen::Index>(n), 6);
  Eigen::VectorXi y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double x0 = normal(rng), x1 = uniform(rng), x4 = normal(rng), x5 = normal(rng);
    const double x2 = unit(rng) < 0.4 ? 1.0 : 0.0;
    const int x3 = cat(rng);
    const double regime = x0 > 0 ? 1.0 : -1.0;
    const double z = 0.8 * x0 + 1.5 * regime * x1 + 0.7 * x2 + (x3 - 2) * 0.4 * x4 + 0.3 * (x3 == 1);
    x.row(i) << x0, x1, x2, static_cast<double>(x3), x4, x5;
    y(i) = unit(rng) < sigmoid(z) ? 1 : 0;
  }
  return make_dataset(x, y,
                      {{"x0", FeatureKind::Numeric, 0},
                       {"x1", FeatureKind::Numeric, 0},
                       {"x2", FeatureKind::Boolean, 0},
                       {"x3", FeatureKind::Categorical, 5},
                       {"x4", FeatureKind::Numeric, 0},
                       {"x5", FeatureKind::Numeric, 0}});
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lrwb-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    const auto p = file(name);
    std::ofstream(p) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace lrwb::testing
