#include "lrwb/config_table.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include <zlib.h>

#include "lrwb/error.hpp"

namespace lrwb {

namespace {

constexpr char kFirstMagic[4] = {'L', 'R', 'W', 'B'};
constexpr char kSecondMagic[4] = {'G', 'B', 'D', 'T'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in chunks.
  std::size_t at = 0;
  while (at < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - at, 1u << 30));
    crc = crc32(crc, bytes.data() + at, chunk);
    at += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Writer {
 public:
  template <std::unsigned_integral T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void put_string(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw Error(Errc::InvalidArgument, "string too long");
    put(static_cast<std::uint16_t>(s.size()));
    put_raw(s.data(), s.size());
  }

  std::vector<std::uint8_t> finish() {
    const auto crc = crc32_of(out_);
    put(crc);
    return std::move(out_);
  }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <std::unsigned_integral T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[at_ + i]) << (8 * i));
    at_ += sizeof(T);
    return v;
  }
  std::int32_t get_i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_string() {
    const auto n = get<std::uint16_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + at_), n);
    at_ += n;
    return s;
  }
  void expect_magic(const char (&magic)[4]) {
    need(4);
    if (std::memcmp(bytes_.data() + at_, magic, 4) != 0) throw Error(Errc::CorruptTable, "bad magic");
    at_ += 4;
  }
  FeatureKind get_kind() {
    const auto k = get<std::uint8_t>();
    if (k > 2) throw Error(Errc::CorruptTable, "bad feature kind");
    return static_cast<FeatureKind>(k);
  }
  std::size_t remaining() const noexcept { return bytes_.size() - at_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - at_ < n) throw Error(Errc::CorruptTable, "table truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t at_ = 0;
};

// Verifies the footer and returns the payload without it.
std::span<const std::uint8_t> checked_payload(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 4) throw Error(Errc::CorruptTable, "table truncated");
  const auto payload = bytes.first(bytes.size() - 4);
  Reader footer(bytes.last(4));
  if (footer.get<std::uint32_t>() != crc32_of(payload)) throw Error(Errc::CorruptTable, "checksum mismatch");
  return payload;
}

void check_version(Reader& in, std::uint16_t expected) {
  const auto v = in.get<std::uint16_t>();
  if (v != expected) {
    throw Error(Errc::VersionMismatch, "format version " + std::to_string(v) + ", expected " + std::to_string(expected));
  }
}

std::uint16_t narrow16(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint16_t>::max()) throw Error(Errc::InvalidArgument, std::string(what) + " too large for table");
  return static_cast<std::uint16_t>(v);
}

std::uint32_t mix(std::uint32_t key) noexcept {
  std::uint64_t h = key * 0x9E3779B97F4A7C15ULL;
  return static_cast<std::uint32_t>(h >> 32);
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

// ---- first stage ---------------------------------------------------------

std::uint32_t FirstStageTable::digit(const Binned& f, double v) noexcept {
  switch (f.kind) {
    case FeatureKind::Numeric: {
      std::uint32_t d = 0;
      for (const float e : f.edges) d += static_cast<double>(e) < v;
      return d;
    }
    case FeatureKind::Boolean:
      return v != 0.0;
    case FeatureKind::Categorical:
      if (v >= 0.0 && v < static_cast<double>(f.cardinality) && v == std::floor(v)) return static_cast<std::uint32_t>(v);
      return f.cardinality;
  }
  return 0;
}

double FirstStageTable::transform(const Input& f, double raw) noexcept {
  double v = raw;
  if (f.kind == FeatureKind::Categorical) {
    const auto unknown = f.code_values.size() - 1;
    const bool known = raw >= 0.0 && raw < static_cast<double>(unknown) && raw == std::floor(raw);
    v = f.code_values[known ? static_cast<std::size_t>(raw) : unknown];
  }
  return (v - static_cast<double>(f.mean)) / static_cast<double>(f.stddev);
}

void FirstStageTable::build_index() {
  strides_.assign(binned_.size(), 1);
  std::uint64_t total = 1;
  for (std::size_t i = binned_.size(); i-- > 0;) {
    strides_[i] = total;
    const auto& f = binned_[i];
    total *= f.kind == FeatureKind::Numeric ? f.edges.size() + 1 : f.kind == FeatureKind::Boolean ? 2 : f.cardinality + 1;
  }
  if (total != total_bins_) throw Error(Errc::CorruptTable, "total_bins disagrees with the bin layout");

  std::size_t capacity = 8;
  while (capacity < 2 * bins_.size()) capacity *= 2;
  slots_.assign(capacity, 0);
  const std::size_t mask = capacity - 1;
  for (std::size_t e = 0; e < bins_.size(); ++e) {
    std::size_t s = mix(bins_[e]) & mask;
    while (slots_[s] != 0) s = (s + 1) & mask;
    slots_[s] = static_cast<std::uint32_t>(e + 1);
  }
}

const float* FirstStageTable::find(BinId bin) const noexcept {
  const std::size_t mask = slots_.size() - 1;
  const std::size_t stride = inputs_.size() + 1;
  for (std::size_t s = mix(bin) & mask;; s = (s + 1) & mask) {
    const auto e = slots_[s];
    if (e == 0) return nullptr;
    if (bins_[e - 1] == bin) return weights_.data() + (e - 1) * stride;
  }
}

FirstStageTable FirstStageTable::from_model(const LRwBinsModel& model) {
  FirstStageTable t;
  t.quantiles_ = narrow16(static_cast<std::size_t>(std::max(model.quantiles, 0)), "b");
  t.total_bins_ = static_cast<std::uint32_t>(model.spec.total_bins());
  for (const auto& f : model.spec.features()) {
    Binned b;
    b.feature = static_cast<std::uint32_t>(f.feature);
    b.kind = f.kind;
    b.cardinality = f.cardinality;
    for (const double e : f.edges) b.edges.push_back(static_cast<float>(e));
    t.binned_.push_back(std::move(b));
  }
  for (const auto& f : model.inputs.features()) {
    Input in;
    in.feature = static_cast<std::uint32_t>(f.feature);
    in.kind = f.kind;
    in.mean = static_cast<float>(f.mean);
    in.stddev = static_cast<float>(f.stddev);
    for (const double c : f.code_values) in.code_values.push_back(static_cast<float>(c));
    t.inputs_.push_back(std::move(in));
  }
  const std::size_t m = t.inputs_.size();
  for (const auto& [bin, w] : model.weights_by_bin) {
    if (static_cast<std::size_t>(w.weights.size()) != m) throw Error(Errc::InvalidArgument, "weight count != m");
    t.bins_.push_back(bin);
    t.weights_.push_back(static_cast<float>(w.bias));
    for (Eigen::Index k = 0; k < w.weights.size(); ++k) t.weights_.push_back(static_cast<float>(w.weights(k)));
  }
  t.build_index();
  return t;
}

std::vector<std::uint8_t> FirstStageTable::encode() const {
  Writer out;
  out.put_raw(kFirstMagic, 4);
  out.put(kFirstStageVersion);
  out.put(n());
  out.put(quantiles_);
  out.put(m());
  out.put(total_bins_);
  for (const auto& f : inputs_) {
    out.put(f.feature);
    out.put(static_cast<std::uint8_t>(f.kind));
    out.put_f32(f.mean);
    out.put_f32(f.stddev);
    out.put(static_cast<std::uint32_t>(f.code_values.size()));
    for (const float c : f.code_values) out.put_f32(c);
  }
  for (const auto& f : binned_) {
    out.put(f.feature);
    out.put(static_cast<std::uint8_t>(f.kind));
    out.put(f.cardinality);
    out.put(narrow16(f.edges.size(), "edge count"));
    for (const float e : f.edges) out.put_f32(e);
  }
  out.put(static_cast<std::uint32_t>(bins_.size()));
  const std::size_t stride = inputs_.size() + 1;
  for (std::size_t e = 0; e < bins_.size(); ++e) {
    out.put(bins_[e]);
    for (std::size_t k = 0; k < stride; ++k) out.put_f32(weights_[e * stride + k]);
  }
  return out.finish();
}

FirstStageTable FirstStageTable::decode(std::span<const std::uint8_t> bytes) {
  Reader in(checked_payload(bytes));
  in.expect_magic(kFirstMagic);
  check_version(in, kFirstStageVersion);
  FirstStageTable t;
  const auto n = in.get<std::uint16_t>();
  t.quantiles_ = in.get<std::uint16_t>();
  const auto m = in.get<std::uint16_t>();
  t.total_bins_ = in.get<std::uint32_t>();
  for (std::uint16_t k = 0; k < m; ++k) {
    Input f;
    f.feature = in.get<std::uint32_t>();
    f.kind = in.get_kind();
    f.mean = in.get_f32();
    f.stddev = in.get_f32();
    const auto count = in.get<std::uint32_t>();
    if (count > in.remaining() / 4) throw Error(Errc::CorruptTable, "table truncated");
    if (f.kind == FeatureKind::Categorical && count == 0) throw Error(Errc::CorruptTable, "categorical input without codes");
    for (std::uint32_t c = 0; c < count; ++c) f.code_values.push_back(in.get_f32());
    t.inputs_.push_back(std::move(f));
  }
  for (std::uint16_t k = 0; k < n; ++k) {
    Binned f;
    f.feature = in.get<std::uint32_t>();
    f.kind = in.get_kind();
    f.cardinality = in.get<std::uint32_t>();
    const auto count = in.get<std::uint16_t>();
    for (std::uint16_t c = 0; c < count; ++c) f.edges.push_back(in.get_f32());
    t.binned_.push_back(std::move(f));
  }
  const auto entries = in.get<std::uint32_t>();
  const std::size_t stride = static_cast<std::size_t>(m) + 1;
  if (entries > in.remaining() / (4 * (stride + 1))) throw Error(Errc::CorruptTable, "table truncated");
  for (std::uint32_t e = 0; e < entries; ++e) {
    const auto bin = in.get<std::uint32_t>();
    if (bin >= t.total_bins_ || (!t.bins_.empty() && bin <= t.bins_.back())) {
      throw Error(Errc::CorruptTable, "weights section not sorted or out of range");
    }
    t.bins_.push_back(bin);
    for (std::size_t k = 0; k < stride; ++k) t.weights_.push_back(in.get_f32());
  }
  if (in.remaining() != 0) throw Error(Errc::CorruptTable, "trailing bytes after weights section");
  t.build_index();
  return t;
}

FirstStageTable FirstStageTable::load(const std::filesystem::path& path) { return decode(read_file(path)); }

LRwBinsModel FirstStageTable::to_model() const {
  LRwBinsModel model;
  std::vector<BinnedFeature> features;
  for (const auto& f : binned_) {
    BinnedFeature b;
    b.feature = f.feature;
    b.kind = f.kind;
    b.cardinality = f.cardinality;
    b.edges.assign(f.edges.begin(), f.edges.end());
    features.push_back(std::move(b));
  }
  model.spec = BinSpec(std::move(features));
  std::vector<InferenceFeature> inputs;
  for (const auto& f : inputs_) {
    InferenceFeature in;
    in.feature = f.feature;
    in.kind = f.kind;
    in.mean = f.mean;
    in.stddev = f.stddev;
    in.code_values.assign(f.code_values.begin(), f.code_values.end());
    inputs.push_back(std::move(in));
  }
  model.inputs = InputTransform(std::move(inputs));
  const std::size_t stride = inputs_.size() + 1;
  for (std::size_t e = 0; e < bins_.size(); ++e) {
    LRWeights w;
    w.bias = weights_[e * stride];
    w.weights.resize(static_cast<Eigen::Index>(stride - 1));
    for (std::size_t k = 1; k < stride; ++k) w.weights(static_cast<Eigen::Index>(k - 1)) = weights_[e * stride + k];
    model.weights_by_bin.emplace(bins_[e], std::move(w));
  }
  model.min_bin_rows = 0;
  model.quantiles = quantiles_;
  return model;
}

std::size_t quantile_section_bytes(const BinSpec& spec) {
  std::size_t bytes = 0;
  for (const auto& f : spec.features()) bytes += 4 + 1 + 4 + 2 + 4 * f.edges.size();
  return bytes;
}

std::size_t export_first_stage(const LRwBinsModel& model, const std::filesystem::path& path) {
  const auto bytes = FirstStageTable::from_model(model).encode();
  write_file(path, bytes);
  return bytes.size();
}

LRwBinsModel import_first_stage(const std::filesystem::path& path) { return FirstStageTable::load(path).to_model(); }

// ---- second stage --------------------------------------------------------

namespace {

void put_subtree(Writer& out, const RegressionTree& tree, std::int32_t at) {
  const auto& node = tree.nodes[static_cast<std::size_t>(at)];
  out.put(static_cast<std::uint8_t>(node.kind));
  if (node.is_leaf()) {
    out.put_f64(node.value);
    return;
  }
  out.put_i32(node.feature);
  out.put_f64(node.threshold);
  out.put_f64(node.gain);
  put_subtree(out, tree, node.left);
  put_subtree(out, tree, node.right);
}

std::int32_t get_subtree(Reader& in, RegressionTree& tree, std::size_t& budget, int depth) {
  if (budget == 0 || depth > 64) throw Error(Errc::CorruptTable, "tree larger than its node count");
  --budget;
  const auto kind = in.get<std::uint8_t>();
  if (kind > 2) throw Error(Errc::CorruptTable, "bad node kind");
  const auto at = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode node;
  node.kind = static_cast<TreeNode::Kind>(kind);
  if (node.is_leaf()) {
    node.value = in.get_f64();
  } else {
    node.feature = in.get_i32();
    node.threshold = in.get_f64();
    node.gain = in.get_f64();
    node.left = get_subtree(in, tree, budget, depth + 1);
    node.right = get_subtree(in, tree, budget, depth + 1);
  }
  tree.nodes[static_cast<std::size_t>(at)] = node;
  return at;
}

}  // namespace

std::vector<std::uint8_t> encode_second_stage(const GbdtModel& model) {
  Writer out;
  out.put_raw(kSecondMagic, 4);
  out.put(kSecondStageVersion);
  out.put(model.schema.fingerprint());
  out.put(static_cast<std::uint32_t>(model.schema.size()));
  for (const auto& f : model.schema.features()) {
    out.put_string(f.name);
    out.put(static_cast<std::uint8_t>(f.kind));
    out.put(f.cardinality);
  }
  out.put(static_cast<std::uint32_t>(model.categories.size()));
  for (const auto& dict : model.categories) {
    out.put(static_cast<std::uint32_t>(dict.size()));
    for (const auto& s : dict) out.put_string(s);
  }
  out.put_f64(model.base_score);
  out.put(static_cast<std::uint32_t>(model.trees.size()));
  for (const auto& tree : model.trees) {
    out.put(static_cast<std::uint32_t>(tree.nodes.size()));
    if (!tree.nodes.empty()) put_subtree(out, tree, 0);
  }
  return out.finish();
}

GbdtModel decode_second_stage(std::span<const std::uint8_t> bytes) {
  Reader in(checked_payload(bytes));
  in.expect_magic(kSecondMagic);
  check_version(in, kSecondStageVersion);
  GbdtModel model;
  const auto fingerprint = in.get<std::uint64_t>();
  const auto width = in.get<std::uint32_t>();
  std::vector<FeatureSpec> specs;
  for (std::uint32_t j = 0; j < width; ++j) {
    FeatureSpec f;
    f.name = in.get_string();
    f.kind = in.get_kind();
    f.cardinality = in.get<std::uint32_t>();
    specs.push_back(std::move(f));
  }
  model.schema = FeatureSchema(std::move(specs));
  if (model.schema.fingerprint() != fingerprint) throw Error(Errc::CorruptTable, "schema fingerprint mismatch");
  const auto dicts = in.get<std::uint32_t>();
  for (std::uint32_t j = 0; j < dicts; ++j) {
    const auto count = in.get<std::uint32_t>();
    if (count > in.remaining() / 2) throw Error(Errc::CorruptTable, "table truncated");
    auto& dict = model.categories.emplace_back();
    for (std::uint32_t k = 0; k < count; ++k) dict.push_back(in.get_string());
  }
  model.base_score = in.get_f64();
  const auto trees = in.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < trees; ++t) {
    std::size_t budget = in.get<std::uint32_t>();
    if (budget > in.remaining()) throw Error(Errc::CorruptTable, "table truncated");
    auto& tree = model.trees.emplace_back();
    const std::size_t expected = budget;
    if (budget > 0) get_subtree(in, tree, budget, 0);
    if (tree.nodes.size() != expected) throw Error(Errc::CorruptTable, "tree node count mismatch");
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf() && (node.feature < 0 || static_cast<std::uint32_t>(node.feature) >= width)) {
        throw Error(Errc::CorruptTable, "split feature out of range");
      }
    }
  }
  if (in.remaining() != 0) throw Error(Errc::CorruptTable, "trailing bytes after trees");
  return model;
}

std::size_t export_second_stage(const GbdtModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_second_stage(model);
  write_file(path, bytes);
  return bytes.size();
}

GbdtModel import_second_stage(const std::filesystem::path& path) { return decode_second_stage(read_file(path)); }

}  // namespace lrwb
