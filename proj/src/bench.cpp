#include "lrwb/bench.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lrwb/error.hpp"

namespace lrwb {

namespace {

using Clock = std::chrono::steady_clock;

void spin_for(std::chrono::nanoseconds d) {
  if (d.count() <= 0) return;
  const auto until = Clock::now() + d;
  while (Clock::now() < until) {
  }
}

std::optional<double> first_attempt(const FirstStageTable& first, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                    std::chrono::nanoseconds overhead) {
  spin_for(overhead);
  return first.predict(row);
}

struct Totals {
  double first_ns = 0.0;
  std::size_t first_calls = 0;
  double second_ns = 0.0;
  std::size_t second_calls = 0;
  double multi_ns = 0.0;
  std::size_t multi_calls = 0;
  std::size_t multi_first = 0;
  std::uint64_t rpc = 0;
  std::vector<Stage> routing;

  void merge(const Totals& o) {
    first_ns += o.first_ns;
    first_calls += o.first_calls;
    second_ns += o.second_ns;
    second_calls += o.second_calls;
    multi_ns += o.multi_ns;
    multi_calls += o.multi_calls;
    multi_first += o.multi_first;
    rpc += o.rpc;
    routing.insert(routing.end(), o.routing.begin(), o.routing.end());
  }
};

double elapsed_ns(Clock::time_point since) {
  return std::chrono::duration<double, std::nano>(Clock::now() - since).count();
}

// One worker's pass over its batches for one batch size.
Totals run_worker(const FirstStageTable& first, Client& client, const Dataset& d,
                  const std::vector<Eigen::Index>& order, const std::vector<Eigen::Index>& hits,
                  std::size_t batch, const BenchOptions& options) {
  Totals t;
  const std::size_t budget = std::min(order.size(), options.rows_per_size);
  const std::size_t batches = std::max<std::size_t>(1, budget / batch);
  for (std::size_t k = 0; k < batches; ++k) {
    const std::size_t begin = (k * batch) % std::max<std::size_t>(order.size(), 1);
    auto row_at = [&](const std::vector<Eigen::Index>& v, std::size_t i) { return d.x.row(v[(begin + i) % v.size()]); };

    if (!hits.empty()) {
      const auto start = Clock::now();
      for (std::size_t i = 0; i < batch; ++i) (void)first_attempt(first, row_at(hits, i), options.first_stage_overhead);
      t.first_ns += elapsed_ns(start);
      t.first_calls += batch;
    }

    auto start = Clock::now();
    for (std::size_t i = 0; i < batch; ++i) (void)client.predict(row_at(order, i));
    t.second_ns += elapsed_ns(start);
    t.second_calls += batch;
    t.rpc += batch;

    start = Clock::now();
    for (std::size_t i = 0; i < batch; ++i) {
      const auto row = row_at(order, i);
      if (first_attempt(first, row, options.first_stage_overhead)) {
        ++t.multi_first;
        t.routing.push_back(Stage::First);
      } else {
        (void)client.predict(row);
        ++t.rpc;
        t.routing.push_back(Stage::Second);
      }
    }
    t.multi_ns += elapsed_ns(start);
    t.multi_calls += batch;
  }
  return t;
}

}  // namespace

LatencyReport bench(const FirstStageTable& first, const Endpoint& server, const Dataset& rows,
                    const BenchOptions& options) {
  if (rows.rows() == 0) throw Error(Errc::InvalidArgument, "benchmark needs at least one row");
  if (options.repetitions < 1 || options.workers < 1) throw Error(Errc::InvalidArgument, "repetitions and workers must be >= 1");
  for (const auto b : options.batch_sizes) {
    if (b == 0) throw Error(Errc::InvalidArgument, "batch size must be >= 1");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto k = static_cast<std::size_t>(options.workers);
  std::vector<std::vector<Eigen::Index>> own(k), own_hits(k);
  for (std::size_t i = 0; i < order.size(); ++i) {
    own[i % k].push_back(order[i]);
    if (first.predict(rows.x.row(order[i]))) own_hits[i % k].push_back(order[i]);
  }
  std::vector<Client> clients;
  for (std::size_t w = 0; w < k; ++w) clients.emplace_back(server, options.timeout);

  LatencyReport report;
  for (const auto batch : options.batch_sizes) {
    Totals sum;
    for (int r = 0; r < options.repetitions; ++r) {
      std::vector<Totals> parts(k);
      if (k == 1) {
        parts[0] = run_worker(first, clients[0], rows, own[0], own_hits[0], batch, options);
      } else {
        std::vector<std::thread> threads;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (std::size_t w = 0; w < k; ++w) {
          threads.emplace_back([&, w] {
            try {
              parts[w] = run_worker(first, clients[w], rows, own[w], own_hits[w], batch, options);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          });
        }
        for (auto& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
      }
      Totals rep;
      for (const auto& p : parts) rep.merge(p);
      report.routing.push_back(rep.routing);
      rep.routing.clear();
      sum.merge(rep);
    }

    LatencyRow row;
    row.batch_size = batch;
    auto mean_ms = [](double ns, std::size_t calls) { return calls ? ns / static_cast<double>(calls) / 1e6 : 0.0; };
    row.mean_first_ms = mean_ms(sum.first_ns, sum.first_calls);
    row.mean_second_ms = mean_ms(sum.second_ns, sum.second_calls);
    row.mean_multistage_ms = mean_ms(sum.multi_ns, sum.multi_calls);
    row.coverage = sum.multi_calls ? static_cast<double>(sum.multi_first) / static_cast<double>(sum.multi_calls) : 0.0;
    row.projected_multistage_ms = projected_multistage_latency(row.mean_first_ms, row.mean_second_ms, row.coverage);
    row.speedup_vs_second = row.mean_multistage_ms > 0 ? row.mean_second_ms / row.mean_multistage_ms : 0.0;
    report.rows.push_back(row);
    report.rpc_calls += sum.rpc;
    report.first_routed += sum.multi_first;
    report.second_routed += sum.multi_calls - sum.multi_first;
  }
  return report;
}

std::string LatencyReport::to_csv() const {
  std::ostringstream os;
  os.precision(6);
  os << "batch_size,mean_first_ms,mean_second_ms,mean_multistage_ms,projected_multistage_ms,speedup_vs_second,coverage\n";
  for (const auto& r : rows) {
    os << r.batch_size << ',' << r.mean_first_ms << ',' << r.mean_second_ms << ',' << r.mean_multistage_ms << ','
       << r.projected_multistage_ms << ',' << r.speedup_vs_second << ',' << r.coverage << '\n';
  }
  return os.str();
}

}  // namespace lrwb
