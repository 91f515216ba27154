#include "lrwb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "lrwb/error.hpp"

namespace lrwb {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// RFC-4180 subset: commas, optional double quotes with "" escapes, no
// embedded newlines.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.emplace_back(trim(field));
  return fields;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::optional<double> parse_boolean(std::string_view s) {
  s = trim(s);
  if (s == "1" || s == "true" || s == "True" || s == "TRUE") return 1.0;
  if (s == "0" || s == "false" || s == "False" || s == "FALSE") return 0.0;
  if (auto v = parse_number(s); v && (*v == 0.0 || *v == 1.0)) return v;
  return std::nullopt;
}

[[noreturn]] void unparseable(std::size_t line, std::string_view column, std::string_view value) {
  std::ostringstream os;
  os << "row " << line << ", column '" << column << "': cannot parse '" << value << "'";
  throw Error(Errc::UnparseableValue, os.str());
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::Numeric: return "numeric";
    case FeatureKind::Boolean: return "boolean";
    case FeatureKind::Categorical: return "categorical";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// FeatureSchema

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.name.empty()) throw Error(Errc::BadSchema, "empty feature name");
    if (!seen.emplace(f.name, i).second) {
      throw Error(Errc::BadSchema, "duplicate feature name '" + f.name + "'");
    }
    if (f.kind == FeatureKind::Categorical && f.cardinality == 1) {
      throw Error(Errc::BadSchema, "categorical feature '" + f.name + "' needs cardinality >= 2");
    }
  }
}

FeatureSchema FeatureSchema::parse(std::string_view text) {
  std::vector<FeatureSpec> features;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::BadSchema, "schema line " + std::to_string(line_no) + ": expected name=kind");
    }
    FeatureSpec spec;
    spec.name = std::string(trim(line.substr(0, eq)));
    std::string_view kind = trim(line.substr(eq + 1));
    if (kind == "numeric") {
      spec.kind = FeatureKind::Numeric;
    } else if (kind == "boolean" || kind == "bool") {
      spec.kind = FeatureKind::Boolean;
    } else if (kind.starts_with("categorical")) {
      spec.kind = FeatureKind::Categorical;
      kind.remove_prefix(std::string_view("categorical").size());
      if (!kind.empty()) {
        if (kind.front() != ':') {
          throw Error(Errc::BadSchema, "schema line " + std::to_string(line_no) + ": bad kind");
        }
        kind.remove_prefix(1);
        const auto [ptr, ec] = std::from_chars(kind.data(), kind.data() + kind.size(), spec.cardinality);
        if (ec != std::errc{} || ptr != kind.data() + kind.size() || spec.cardinality < 2) {
          throw Error(Errc::BadSchema,
                      "schema line " + std::to_string(line_no) + ": cardinality must be an integer >= 2");
        }
      }
    } else {
      throw Error(Errc::BadSchema,
                  "schema line " + std::to_string(line_no) + ": unknown kind '" + std::string(kind) + "'");
    }
    features.push_back(std::move(spec));
  }
  return FeatureSchema(std::move(features));
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

std::string FeatureSchema::to_text() const {
  std::ostringstream os;
  for (const auto& f : features_) {
    os << f.name << '=' << to_string(f.kind);
    if (f.kind == FeatureKind::Categorical && f.cardinality > 0) os << ':' << f.cardinality;
    os << '\n';
  }
  return os.str();
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::uint64_t FeatureSchema::fingerprint() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : features_) {
    mix(f.name.data(), f.name.size());
    const auto kind = static_cast<std::uint8_t>(f.kind);
    mix(&kind, 1);
    const std::uint8_t card[4] = {static_cast<std::uint8_t>(f.cardinality),
                                  static_cast<std::uint8_t>(f.cardinality >> 8),
                                  static_cast<std::uint8_t>(f.cardinality >> 16),
                                  static_cast<std::uint8_t>(f.cardinality >> 24)};
    mix(card, 4);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::take(std::span<const Eigen::Index> indices) const {
  Dataset out;
  out.schema = schema;
  out.categories = categories;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.x.row(r) = x.row(indices[i]);
    out.y(r) = y(indices[i]);
  }
  return out;
}

double Dataset::positive_rate() const {
  if (y.size() == 0) return 0.0;
  return static_cast<double>(y.sum()) / static_cast<double>(y.size());
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw Error(Errc::BadSchema, "feature/label row count mismatch");
  if (static_cast<std::size_t>(x.cols()) != schema.size()) {
    throw Error(Errc::BadSchema, "feature column count does not match schema");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0 && y(i) != 1) throw Error(Errc::NonBinaryLabel, "label must be 0 or 1");
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& f = schema[j];
    const auto col = x.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      const double v = col(i);
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteInput, "non-finite value in '" + f.name + "'");
      if (f.kind == FeatureKind::Boolean && v != 0.0 && v != 1.0) {
        throw Error(Errc::BadSchema, "boolean feature '" + f.name + "' holds a non 0/1 value");
      }
      if (f.kind == FeatureKind::Categorical &&
          (v < 0.0 || v > f.cardinality || v != std::floor(v))) {
        throw Error(Errc::BadSchema, "categorical feature '" + f.name + "' holds an invalid code");
      }
    }
  }
}

Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                 std::string_view label_column, const CategoryDictionary* dictionary) {
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::IoError, path.string() + " is empty");
  const auto header = split_record(line);

  auto column_of = [&header](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  };

  const auto label_col = column_of(label_column);
  if (!label_col) throw Error(Errc::MissingColumn, "label column '" + std::string(label_column) + "' not in header");
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features()) {
    const auto c = column_of(f.name);
    if (!c) throw Error(Errc::MissingColumn, "column '" + f.name + "' not in header");
    feature_cols.push_back(*c);
  }
  if (dictionary && dictionary->size() != schema.size()) {
    throw Error(Errc::InvalidArgument, "category dictionary does not match schema");
  }

  const std::size_t f_count = schema.size();
  std::vector<std::unordered_map<std::string, std::uint32_t>> codes(f_count);
  CategoryDictionary categories(f_count);
  if (dictionary) {
    categories = *dictionary;
    for (std::size_t j = 0; j < f_count; ++j) {
      for (std::uint32_t k = 0; k < categories[j].size(); ++k) codes[j].emplace(categories[j][k], k);
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_record(line);
    if (fields.size() != header.size()) {
      throw Error(Errc::UnparseableValue, "row " + std::to_string(line_no) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " +
                                              std::to_string(fields.size()));
    }
    const auto& label = fields[*label_col];
    if (label == "1" || label == "1.0") {
      labels.push_back(1);
    } else if (label == "0" || label == "0.0") {
      labels.push_back(0);
    } else {
      throw Error(Errc::NonBinaryLabel, "row " + std::to_string(line_no) + ": label '" + label + "'");
    }
    for (std::size_t j = 0; j < f_count; ++j) {
      const auto& spec = schema[j];
      const auto& field = fields[feature_cols[j]];
      switch (spec.kind) {
        case FeatureKind::Numeric: {
          const auto v = parse_number(field);
          if (!v) unparseable(line_no, spec.name, field);
          values.push_back(*v);
          break;
        }
        case FeatureKind::Boolean: {
          const auto v = parse_boolean(field);
          if (!v) unparseable(line_no, spec.name, field);
          values.push_back(*v);
          break;
        }
        case FeatureKind::Categorical: {
          if (field.empty()) unparseable(line_no, spec.name, field);
          auto it = codes[j].find(field);
          if (it == codes[j].end()) {
            if (dictionary) {
              values.push_back(static_cast<double>(spec.cardinality));  // UNKNOWN
              break;
            }
            const auto code = static_cast<std::uint32_t>(categories[j].size());
            if (spec.cardinality > 0 && code >= spec.cardinality) {
              throw Error(Errc::BadSchema, "row " + std::to_string(line_no) + ": feature '" + spec.name +
                                               "' exceeds declared cardinality " +
                                               std::to_string(spec.cardinality));
            }
            it = codes[j].emplace(field, code).first;
            categories[j].push_back(field);
          }
          values.push_back(static_cast<double>(it->second));
          break;
        }
      }
    }
  }
  if (labels.empty()) throw Error(Errc::InvalidArgument, path.string() + " has no data rows");

  std::vector<FeatureSpec> specs = schema.features();
  for (std::size_t j = 0; j < f_count; ++j) {
    if (specs[j].kind == FeatureKind::Categorical && specs[j].cardinality == 0) {
      specs[j].cardinality = std::max<std::uint32_t>(2, static_cast<std::uint32_t>(categories[j].size()));
    }
  }

  Dataset d;
  d.schema = FeatureSchema(std::move(specs));
  d.categories = std::move(categories);
  const auto n = static_cast<Eigen::Index>(labels.size());
  d.x = Eigen::Map<const FeatureMatrix>(values.data(), n, static_cast<Eigen::Index>(f_count));
  d.y = Eigen::Map<const Eigen::VectorXi>(labels.data(), n);
  return d;
}

FeatureSchema infer_schema(const std::filesystem::path& path, std::string_view label_column) {
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::IoError, path.string() + " is empty");
  const auto header = split_record(line);
  std::vector<bool> numeric(header.size(), true);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_record(line);
    for (std::size_t c = 0; c < std::min(fields.size(), header.size()); ++c) {
      if (numeric[c] && !parse_number(fields[c])) numeric[c] = false;
    }
  }
  std::vector<FeatureSpec> specs;
  bool label_seen = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_seen = true;
      continue;
    }
    specs.push_back({header[c], numeric[c] ? FeatureKind::Numeric : FeatureKind::Categorical, 0});
  }
  if (!label_seen) throw Error(Errc::MissingColumn, "label column '" + std::string(label_column) + "' not in header");
  return FeatureSchema(std::move(specs));
}

std::vector<std::string> split_csv_record(std::string_view line) { return split_record(line); }

Eigen::RowVectorXd encode_row(std::span<const std::string> fields, const FeatureSchema& schema,
                              const CategoryDictionary& dictionary) {
  if (fields.size() != schema.size()) {
    throw Error(Errc::SchemaMismatch, "expected " + std::to_string(schema.size()) + " fields, got " +
                                          std::to_string(fields.size()));
  }
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(fields.size()));
  for (std::size_t j = 0; j < fields.size(); ++j) {
    const auto& spec = schema[j];
    std::optional<double> v;
    switch (spec.kind) {
      case FeatureKind::Numeric: v = parse_number(fields[j]); break;
      case FeatureKind::Boolean: v = parse_boolean(fields[j]); break;
      case FeatureKind::Categorical: {
        const auto& names = dictionary.at(j);
        const auto it = std::find(names.begin(), names.end(), trim(fields[j]));
        v = static_cast<double>(it == names.end() ? spec.cardinality
                                                  : static_cast<std::uint32_t>(it - names.begin()));
        break;
      }
    }
    if (!v) unparseable(1, spec.name, fields[j]);
    row(static_cast<Eigen::Index>(j)) = *v;
  }
  return row;
}

// ---------------------------------------------------------------------------
// split

DatasetSplit split(const Dataset& d, SplitFractions fractions, std::uint64_t seed) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (!(fractions.train > 0.0 && fractions.validation > 0.0 && fractions.test > 0.0) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw Error(Errc::BadFractions, "split fractions must be positive and sum to 1");
  }
  const auto n = d.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Fisher-Yates with raw engine output so the permutation is identical
  // across standard library implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions.validation));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions.test));
  const auto n_train = order.size() - n_val - n_test;

  const std::span<const Eigen::Index> all(order);
  DatasetSplit out;
  out.train = d.take(all.subspan(0, n_train));
  out.validation = d.take(all.subspan(n_train, n_val));
  out.test = d.take(all.subspan(n_train + n_val, n_test));
  return out;
}

// ---------------------------------------------------------------------------
// Normalizer

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size()) throw Error(Errc::InvalidArgument, "normalizer size mismatch");
  for (auto& s : stddev_) s = std::max(s, kStddevFloor);
}

Normalizer Normalizer::fit(const Dataset& train) {
  const auto f = static_cast<std::size_t>(train.features());
  std::vector<double> mean(f, 0.0);
  std::vector<double> stddev(f, 1.0);
  const auto n = static_cast<double>(train.rows());
  for (std::size_t j = 0; j < f; ++j) {
    if (train.schema[j].kind != FeatureKind::Numeric || train.rows() == 0) continue;
    const auto col = train.x.col(static_cast<Eigen::Index>(j));
    const double mu = col.sum() / n;
    const double var = (col.array() - mu).square().sum() / n;
    mean[j] = mu;
    stddev[j] = std::sqrt(var);
  }
  return Normalizer(std::move(mean), std::move(stddev));
}

Dataset Normalizer::apply(const Dataset& d) const {
  if (static_cast<std::size_t>(d.features()) != mean_.size()) {
    throw Error(Errc::SchemaMismatch, "normalizer fitted on a different feature count");
  }
  Dataset out = d;
  for (std::size_t j = 0; j < mean_.size(); ++j) {
    if (d.schema[j].kind != FeatureKind::Numeric) continue;
    auto col = out.x.col(static_cast<Eigen::Index>(j));
    col = (col.array() - mean_[j]) / stddev_[j];
  }
  return out;
}

Normalizer Normalizer::quantized() const {
  auto round = [](std::vector<double> v) {
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
    return v;
  };
  auto stddev = round(stddev_);
  // A float rounding of a value near the floor could land below it.
  for (auto& s : stddev) {
    if (s < kStddevFloor) s = static_cast<double>(std::nextafter(static_cast<float>(kStddevFloor), 1.0f));
  }
  return Normalizer(round(mean_), std::move(stddev));
}

}  // namespace lrwb
