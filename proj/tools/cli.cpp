#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "lrwb/automl.hpp"
#include "lrwb/bench.hpp"
#include "lrwb/config_table.hpp"
#include "lrwb/error.hpp"
#include "lrwb/pipeline.hpp"
#include "lrwb/rpc.hpp"

namespace lrwb {

namespace {

struct DataOptions {
  std::string data;
  std::string schema;
  std::string label = "income";
  std::uint64_t seed = 0;

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--data", data, "CSV file with a header row");
    if (required) opt->required();
    app->add_option("--schema", schema, "schema sidecar (default: <data>.schema, else inferred)");
    app->add_option("--label", label, "label column")->capture_default_str();
    app->add_option("--seed", seed, "split / training seed")->capture_default_str();
  }

  Dataset load() const {
    std::optional<std::filesystem::path> s;
    if (!schema.empty()) s = schema;
    return load_dataset(data, label, s);
  }
};

struct TrainOptions {
  PipelineConfig config;
  std::string metric = "accuracy";
  std::string ranking = "gain";

  void add(CLI::App* app) {
    app->add_option("--b", config.b, "quantile bins per numeric feature")->capture_default_str();
    app->add_option("--n", config.n, "features that define combined bins")->capture_default_str();
    app->add_option("--m", config.m, "inference features (0 = all)")->capture_default_str();
    app->add_option("--tolerance", config.tolerance, "allowed metric loss vs the second stage")->capture_default_str();
    app->add_option("--metric", metric, "allocation metric")->check(CLI::IsMember({"accuracy", "roc_auc"}))->capture_default_str();
    app->add_option("--ranking", ranking, "feature ranking")->check(CLI::IsMember({"gain", "mrmr"}))->capture_default_str();
    app->add_option("--min-bin-rows", config.first.min_bin_rows, "smallest bin that gets an LR")->capture_default_str();
    app->add_option("--l2", config.first.lr.l2, "per-bin L2 strength")->capture_default_str();
    app->add_option("--trees", config.gbdt.num_trees, "second-stage trees")->capture_default_str();
    app->add_option("--depth", config.gbdt.max_depth, "second-stage depth")->capture_default_str();
    app->add_option("--learning-rate", config.gbdt.learning_rate, "second-stage shrinkage")->capture_default_str();
  }

  PipelineConfig resolve(std::uint64_t seed) const {
    PipelineConfig c = config;
    c.seed = seed;
    c.metric = metric == "roc_auc" ? MetricKind::RocAuc : MetricKind::Accuracy;
    c.ranking = ranking == "mrmr" ? RankingMethod::Mrmr : RankingMethod::GbdtGain;
    return c;
  }
};

// Writes to `path`, or to `out` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error(Errc::IoError, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(Errc::IoError, "write failed: " + path);
}

Dataset load_with_model(const std::string& path, const std::string& label, const GbdtModel& model) {
  return load_csv(path, model.schema, label, &model.categories);
}

// Reads feature rows by column name; the label column, if any, is ignored.
std::vector<Eigen::RowVectorXd> read_rows(std::istream& in, const GbdtModel& model) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::IoError, "input has no header");
  const auto header = split_csv_record(line);
  std::vector<std::size_t> cols;
  for (const auto& f : model.schema.features()) {
    const auto it = std::find(header.begin(), header.end(), f.name);
    if (it == header.end()) throw Error(Errc::MissingColumn, "column '" + f.name + "' not in header");
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<Eigen::RowVectorXd> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != header.size()) throw Error(Errc::UnparseableValue, "row " + std::to_string(rows.size() + 2) + " has the wrong field count");
    std::vector<std::string> picked;
    for (const auto c : cols) picked.push_back(fields[c]);
    rows.push_back(encode_row(picked, model.schema, model.categories));
  }
  return rows;
}

int cmd_train(const DataOptions& data, const TrainOptions& train, const std::string& out_dir,
              const std::string& name, std::ostream& out) {
  const Dataset d = data.load();
  const auto result = run_pipeline(d, train.resolve(data.seed));
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const auto first_bytes = export_first_stage(result.first, dir / (name + ".lrwb"));
  const auto second_bytes = export_second_stage(result.second, dir / (name + ".gbdt"));
  emit((dir / (name + ".allocation")).string(), result.allocation.to_text(), out);
  emit((dir / (name + ".curve.csv")).string(), result.curve.to_csv(), out);
  emit((dir / (name + ".ranking.csv")).string(), result.ranking.to_text(d.schema), out);
  const auto report = evaluate(result, result.split.test);
  emit((dir / (name + ".eval.csv")).string(), report.to_csv(), out);

  out << "coverage=" << result.allocation.coverage << " bins=" << result.allocation.first_stage_bins.size()
      << "/" << result.lrwbins.weights_by_bin.size() << " total_bins=" << result.lrwbins.spec.total_bins() << '\n';
  out << "lrwb_bytes=" << first_bytes << " quantile_bytes=" << quantile_section_bytes(result.first.spec)
      << " gbdt_bytes=" << second_bytes << '\n';
  out << report.to_csv();
  return 0;
}

int cmd_tune(const DataOptions& data, const TrainOptions& train, TuneGrid grid, const std::string& objective,
             const std::string& out_path, std::ostream& out) {
  const Dataset d = data.load();
  const auto cfg = train.resolve(data.seed);
  const auto parts = split(d, cfg.fractions, cfg.seed);
  GbdtParams gp = cfg.gbdt;
  gp.seed = cfg.seed;
  const GbdtModel second = train_gbdt(parts.train, gp);
  const auto ranking = cfg.ranking == RankingMethod::Mrmr ? rank_mrmr(parts.train) : rank_by_gain(second);
  const auto obj = objective == "coverage" ? TuneObjective::max_coverage(cfg.tolerance, cfg.metric) : TuneObjective::max_auc();
  const auto result = tune(parts.train, parts.validation, ranking, grid, obj, &second, cfg.first);
  emit(out_path, result.to_csv(), out);
  const auto& w = result.best();
  (out_path.empty() ? std::cerr : out) << "winner b=" << w.b << " n=" << w.n << " m=" << w.m
                                       << " val_roc_auc=" << w.val_roc_auc << '\n';
  return 0;
}

int cmd_allocate(const DataOptions& data, const TrainOptions& train, const std::string& out_path,
                 const std::string& bins_path, std::ostream& out) {
  const auto result = run_pipeline(data.load(), train.resolve(data.seed));
  emit(out_path, result.curve.to_csv(), out);
  if (!bins_path.empty()) emit(bins_path, result.allocation.to_text(), out);
  return 0;
}

int cmd_export(const std::string& table, const std::string& gbdt, const std::string& out_path, std::ostream& out) {
  if (table.empty() == gbdt.empty()) throw Error(Errc::InvalidArgument, "give exactly one of --table or --gbdt");
  std::vector<std::uint8_t> bytes;
  if (!table.empty()) {
    const auto t = FirstStageTable::load(table);
    bytes = t.encode();
    const auto model = t.to_model();
    const std::size_t weight_bytes = 4 + t.entries() * (4 + 4 * (1 + static_cast<std::size_t>(t.m())));
    out << "n,b,m,total_bins,entries,quantile_bytes,weights_bytes,bytes\n"
        << t.n() << ',' << t.b() << ',' << t.m() << ',' << t.total_bins() << ',' << t.entries() << ','
        << quantile_section_bytes(model.spec) << ',' << weight_bytes << ',' << bytes.size() << '\n';
  } else {
    const auto m = import_second_stage(gbdt);
    bytes = encode_second_stage(m);
    std::size_t nodes = 0;
    for (const auto& t : m.trees) nodes += t.nodes.size();
    out << "features,trees,nodes,bytes\n" << m.schema.size() << ',' << m.trees.size() << ',' << nodes << ',' << bytes.size() << '\n';
  }
  if (!out_path.empty()) write_file(out_path, bytes);
  return 0;
}

int cmd_serve(const std::string& model_path, const std::string& listen, double latency_ms, double jitter_ms,
              std::ostream& out) {
  auto model = std::make_shared<const GbdtModel>(import_second_stage(model_path));
  LatencyInjector injector;
  injector.delay = std::chrono::microseconds(static_cast<std::int64_t>(latency_ms * 1000.0));
  injector.jitter = std::chrono::microseconds(static_cast<std::int64_t>(jitter_ms * 1000.0));

  // Block the shutdown signals before any server thread exists so only
  // sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  Server server(model, Endpoint::parse(listen), injector);
  out << "listening on " << server.endpoint().to_string() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  out << "served " << server.requests() << " requests" << std::endl;
  return 0;
}

int cmd_predict(const std::string& first_path, const std::string& gbdt_path, const std::string& connect,
                const std::string& row, const std::string& data, std::ostream& out) {
  const auto table = FirstStageTable::load(first_path);
  const auto second = import_second_stage(gbdt_path);
  std::unique_ptr<Client> client;
  if (!connect.empty()) client = std::make_unique<Client>(Endpoint::parse(connect));

  std::vector<Eigen::RowVectorXd> rows;
  if (!row.empty()) {
    rows.push_back(encode_row(split_csv_record(row), second.schema, second.categories));
  } else {
    std::ifstream in(data);
    if (!in) throw Error(Errc::IoError, "cannot open " + data);
    rows = read_rows(in, second);
  }
  out << "probability,stage\n";
  out.precision(10);
  for (const auto& r : rows) {
    if (const auto p = table.predict(r)) {
      out << *p << ",first\n";
    } else {
      out << (client ? client->predict(r) : second.predict(r)) << ",second\n";
    }
  }
  return 0;
}

int cmd_eval(const std::string& first_path, const std::string& gbdt_path, const DataOptions& data, bool test_split,
             const std::string& out_path, std::ostream& out) {
  const auto first = import_first_stage(first_path);
  const auto second = import_second_stage(gbdt_path);
  Dataset d = load_with_model(data.data, data.label, second);
  if (test_split) d = split(d, SplitFractions{}, data.seed).test;
  emit(out_path, evaluate(first, second, d).to_csv(), out);
  return 0;
}

int cmd_bench(const std::string& first_path, const std::string& gbdt_path, const DataOptions& data,
              const std::string& connect, double latency_ms, double jitter_ms, BenchOptions options,
              double first_overhead_us, const std::string& out_path, std::ostream& out) {
  const auto table = FirstStageTable::load(first_path);
  auto second = std::make_shared<const GbdtModel>(import_second_stage(gbdt_path));
  const Dataset d = load_with_model(data.data, data.label, *second);
  options.seed = data.seed;
  options.first_stage_overhead = std::chrono::nanoseconds(static_cast<std::int64_t>(first_overhead_us * 1000.0));

  std::unique_ptr<Server> local;
  Endpoint endpoint;
  if (connect.empty()) {
    LatencyInjector injector;
    injector.delay = std::chrono::microseconds(static_cast<std::int64_t>(latency_ms * 1000.0));
    injector.jitter = std::chrono::microseconds(static_cast<std::int64_t>(jitter_ms * 1000.0));
    local = std::make_unique<Server>(second, Endpoint{"127.0.0.1", 0}, injector);
    endpoint = local->endpoint();
  } else {
    endpoint = Endpoint::parse(connect);
  }
  const auto report = bench(table, endpoint, d, options);
  emit(out_path, report.to_csv(), out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multistage inference: LRwBins first stage with a GBDT fallback", "lrwb"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  int code = 0;

  DataOptions data;
  TrainOptions train;
  std::string out_dir = ".", name = "model", out_path, bins_path;
  std::string first_path, gbdt_path, table_path, connect, listen = "127.0.0.1:7070", row;
  std::string objective = "auc";
  double latency_ms = 0.0, jitter_ms = 0.0, first_overhead_us = 0.0;
  bool test_split = false;
  TuneGrid grid;
  BenchOptions bench_options;

  auto* train_cmd = app.add_subcommand("train", "split, train both stages, allocate bins, export models");
  data.add(train_cmd);
  train.add(train_cmd);
  train_cmd->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  train_cmd->add_option("--name", name, "file name stem")->capture_default_str();

  auto* tune_cmd = app.add_subcommand("tune", "grid search over b, n, m");
  data.add(tune_cmd);
  train.add(tune_cmd);
  tune_cmd->add_option("--b-values", grid.b_values, "b grid")->delimiter(',');
  tune_cmd->add_option("--n-values", grid.n_values, "n grid")->delimiter(',');
  tune_cmd->add_option("--m-values", grid.m_values, "m grid (0 = all)")->delimiter(',');
  tune_cmd->add_option("--bin-budget", grid.bin_budget, "largest total_bins evaluated")->capture_default_str();
  tune_cmd->add_option("--objective", objective, "auc or coverage")->check(CLI::IsMember({"auc", "coverage"}))->capture_default_str();
  tune_cmd->add_option("--out", out_path, "CSV output (default stdout)");

  auto* allocate_cmd = app.add_subcommand("allocate", "coverage sweep and cutoff on validation");
  data.add(allocate_cmd);
  train.add(allocate_cmd);
  allocate_cmd->add_option("--out", out_path, "curve CSV (default stdout)");
  allocate_cmd->add_option("--bins-out", bins_path, "selected bin ids");

  auto* export_cmd = app.add_subcommand("export", "describe and re-encode a model file");
  export_cmd->add_option("--table", table_path, ".lrwb file");
  export_cmd->add_option("--gbdt", gbdt_path, ".gbdt file");
  export_cmd->add_option("--out", out_path, "write the re-encoded bytes here");

  auto* serve_cmd = app.add_subcommand("serve", "serve the second stage over TCP until SIGINT/SIGTERM");
  serve_cmd->add_option("--gbdt", gbdt_path, ".gbdt file")->required();
  serve_cmd->add_option("--listen", listen, "host:port")->capture_default_str();
  serve_cmd->add_option("--inject-latency-ms", latency_ms, "delay before every response")->check(CLI::NonNegativeNumber);
  serve_cmd->add_option("--jitter-ms", jitter_ms, "extra uniform delay")->check(CLI::NonNegativeNumber);

  auto* predict_cmd = app.add_subcommand("predict", "score rows with first-stage routing");
  predict_cmd->add_option("--first", first_path, ".lrwb file")->required();
  predict_cmd->add_option("--gbdt", gbdt_path, ".gbdt file (schema, local fallback)")->required();
  predict_cmd->add_option("--connect", connect, "remote second stage host:port");
  auto* row_opt = predict_cmd->add_option("--row", row, "one comma-separated record in schema order");
  auto* file_opt = predict_cmd->add_option("--data", data.data, "CSV with a header row");
  row_opt->excludes(file_opt);
  predict_cmd->require_option(1, 0);

  auto* eval_cmd = app.add_subcommand("eval", "metrics of GBDT, hybrid and covered first stage");
  eval_cmd->add_option("--first", first_path, ".lrwb file")->required();
  eval_cmd->add_option("--gbdt", gbdt_path, ".gbdt file")->required();
  eval_cmd->add_option("--data", data.data, "labelled CSV")->required();
  eval_cmd->add_option("--label", data.label, "label column")->capture_default_str();
  eval_cmd->add_option("--seed", data.seed, "split seed for --test-split")->capture_default_str();
  eval_cmd->add_flag("--test-split", test_split, "evaluate only the held-out test split");
  eval_cmd->add_option("--out", out_path, "CSV output (default stdout)");

  auto* bench_cmd = app.add_subcommand("bench", "first / second / multistage latency");
  bench_cmd->add_option("--first", first_path, ".lrwb file")->required();
  bench_cmd->add_option("--gbdt", gbdt_path, ".gbdt file")->required();
  bench_cmd->add_option("--data", data.data, "labelled CSV")->required();
  bench_cmd->add_option("--label", data.label, "label column")->capture_default_str();
  bench_cmd->add_option("--seed", data.seed, "row order seed")->capture_default_str();
  bench_cmd->add_option("--connect", connect, "remote server; default starts one in-process");
  bench_cmd->add_option("--inject-latency-ms", latency_ms, "in-process server delay")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--jitter-ms", jitter_ms, "in-process server jitter")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--batch-sizes", bench_options.batch_sizes, "batch sizes")->delimiter(',');
  bench_cmd->add_option("--repetitions", bench_options.repetitions, "passes per batch size")->capture_default_str();
  bench_cmd->add_option("--rows-per-size", bench_options.rows_per_size, "rows per pass")->capture_default_str();
  bench_cmd->add_option("--first-overhead-us", first_overhead_us, "busy-wait per first-stage attempt");
  bench_cmd->add_option("--workers", bench_options.workers, "parallel clients")->capture_default_str();
  bench_cmd->add_option("--out", out_path, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    err << app.help();
    return 2;
  }

  try {
    if (*train_cmd) code = cmd_train(data, train, out_dir, name, out);
    else if (*tune_cmd) code = cmd_tune(data, train, grid, objective, out_path, out);
    else if (*allocate_cmd) code = cmd_allocate(data, train, out_path, bins_path, out);
    else if (*export_cmd) code = cmd_export(table_path, gbdt_path, out_path, out);
    else if (*serve_cmd) code = cmd_serve(gbdt_path, listen, latency_ms, jitter_ms, out);
    else if (*predict_cmd) code = cmd_predict(first_path, gbdt_path, connect, row, data.data, out);
    else if (*eval_cmd) code = cmd_eval(first_path, gbdt_path, data, test_split, out_path, out);
    else if (*bench_cmd) code = cmd_bench(first_path, gbdt_path, data, connect, latency_ms, jitter_ms, bench_options,
                                          first_overhead_us, out_path, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return code;
}

}  // namespace lrwb
