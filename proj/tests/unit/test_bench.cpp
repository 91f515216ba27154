#include "doctest.h"
#include "fixtures.hpp"
#include "lrwb/bench.hpp"
#include "lrwb/error.hpp"
#include "lrwb/feature_ranking.hpp"

using namespace lrwb;
using namespace std::chrono_literals;

namespace {

struct Setup {
  Dataset data;
  std::shared_ptr<const GbdtModel> gbdt;
  FirstStageTable table;
};

const Setup& setup() {
  static const Setup s = [] {
    Setup out;
    out.data = testing::synthetic(800, 31);
    out.gbdt = std::make_shared<const GbdtModel>(train_gbdt(out.data, {.num_trees = 10, .max_depth = 3}));
    FeatureRanking r;
    for (Eigen::Index j = 0; j < 6; ++j) r.order.push_back({j, 0.0});
    const std::vector<Eigen::Index> feats{0, 1, 4};
    auto first = train_lrwbins(out.data, fit_bins(out.data, r, 2, 2), feats, {{}, 30});
    std::size_t k = 0;
    std::erase_if(first.weights_by_bin, [&](const auto&) { return k++ % 2 == 1; });
    out.table = FirstStageTable::from_model(first);
    return out;
  }();
  return s;
}

}  // namespace

TEST_CASE("projected latency") {
  CHECK(projected_multistage_latency(0.0, 1.0, 0.3) == doctest::Approx(0.7));
  CHECK(projected_multistage_latency(0.2, 1.0, 0.0) == doctest::Approx(1.2));
  CHECK(projected_multistage_latency(0.2, 1.0, 1.0) == doctest::Approx(0.2));
  CHECK(projected_multistage_latency(0.2, 1.0, 0.5) == doctest::Approx(0.7));
  const auto d = projected_multistage_latency(std::chrono::microseconds(200), std::chrono::microseconds(1000), 0.5);
  CHECK(d.count() == doctest::Approx(0.7));
}

TEST_CASE("bench counts every request and routes identically across repetitions") {
  const auto& s = setup();
  Server server(s.gbdt, Endpoint{});
  BenchOptions o;
  o.batch_sizes = {1, 7, 50};
  o.repetitions = 3;
  o.rows_per_size = 100;
  o.seed = 4;
  const auto report = bench(s.table, server.endpoint(), s.data, o);
  REQUIRE(report.rows.size() == 3);
  CHECK(server.requests() == report.rpc_calls);
  REQUIRE(report.routing.size() == 9);
  for (std::size_t size = 0; size < 3; ++size) {
    CHECK(report.routing[size * 3] == report.routing[size * 3 + 1]);
    CHECK(report.routing[size * 3] == report.routing[size * 3 + 2]);
  }
  CHECK(report.first_routed > 0);
  CHECK(report.second_routed > 0);
  for (const auto& row : report.rows) {
    CHECK(row.coverage > 0.0);
    CHECK(row.coverage < 1.0);
    CHECK(row.projected_multistage_ms == doctest::Approx(
                                             projected_multistage_latency(row.mean_first_ms, row.mean_second_ms, row.coverage)));
  }
  // Same seed, same routing.
  const auto again = bench(s.table, server.endpoint(), s.data, o);
  CHECK(again.routing == report.routing);
  CHECK(report.to_csv().rfind("batch_size,mean_first_ms,", 0) == 0);
}

TEST_CASE("multistage latency sits between the first stage and the sum of both") {
  const auto& s = setup();
  Server server(s.gbdt, Endpoint{}, {2ms, 0us});
  BenchOptions o;
  o.batch_sizes = {20};
  o.repetitions = 1;
  o.rows_per_size = 100;
  o.first_stage_overhead = 200us;
  const auto report = bench(s.table, server.endpoint(), s.data, o);
  const auto& r = report.rows[0];
  CHECK(r.mean_first_ms >= 0.2);
  CHECK(r.mean_second_ms >= 2.0);
  CHECK(r.mean_multistage_ms >= r.mean_first_ms);
  CHECK(r.mean_multistage_ms <= 1.2 * (r.mean_first_ms + r.mean_second_ms));
  CHECK(r.speedup_vs_second > 1.0);
}

TEST_CASE("bench rejects bad options") {
  const auto& s = setup();
  Server server(s.gbdt, Endpoint{});
  BenchOptions o;
  o.batch_sizes = {0};
  CHECK_THROWS_AS(bench(s.table, server.endpoint(), s.data, o), Error);
  o = {};
  o.repetitions = 0;
  CHECK_THROWS_AS(bench(s.table, server.endpoint(), s.data, o), Error);
}
