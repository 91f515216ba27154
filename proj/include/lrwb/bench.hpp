#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "lrwb/config_table.hpp"
#include "lrwb/dataset.hpp"
#include "lrwb/rpc.hpp"

namespace lrwb {

/// Mean latency when the first stage is always tried and the second stage is
/// added on a miss: c*t1 + (1-c)*(t1+t2).
template <typename Rep, typename Period>
std::chrono::duration<double, std::milli> projected_multistage_latency(std::chrono::duration<Rep, Period> t1,
                                                                       std::chrono::duration<Rep, Period> t2,
                                                                       double coverage) {
  const std::chrono::duration<double, std::milli> a = t1, b = t2;
  return coverage * a + (1.0 - coverage) * (a + b);
}

inline double projected_multistage_latency(double t1, double t2, double coverage) {
  return coverage * t1 + (1.0 - coverage) * (t1 + t2);
}

struct BenchOptions {
  std::vector<std::size_t> batch_sizes{1, 10, 100, 1000};
  int repetitions = 3;
  /// Rows scored per batch size and repetition (rounded to whole batches).
  std::size_t rows_per_size = 1000;
  /// Busy-wait added to every first-stage attempt. In-process LR takes
  /// ~100ns, so this stands in for the feature fetching around it.
  std::chrono::nanoseconds first_stage_overhead{0};
  int workers = 1;
  std::uint64_t seed = 0;
  std::chrono::milliseconds timeout{1000};
};

struct LatencyRow {
  std::size_t batch_size = 0;
  double mean_first_ms = 0.0;
  double mean_second_ms = 0.0;
  double mean_multistage_ms = 0.0;
  double projected_multistage_ms = 0.0;
  double speedup_vs_second = 0.0;
  double coverage = 0.0;  // fraction of multistage calls served First
};

struct LatencyReport {
  std::vector<LatencyRow> rows;
  std::uint64_t rpc_calls = 0;        // every request this benchmark sent
  std::uint64_t second_routed = 0;    // multistage calls that went remote
  std::uint64_t first_routed = 0;
  /// Per-repetition routing of the multistage pass, for determinism checks.
  std::vector<std::vector<Stage>> routing;

  std::string to_csv() const;
};

/// Times pure-first (hit rows only), pure-second and multistage scoring per
/// batch size against a running server. Batches are consecutive rows of a
/// seeded shuffle, identical across repetitions.
LatencyReport bench(const FirstStageTable& first, const Endpoint& server, const Dataset& rows,
                    const BenchOptions& options = {});

}  // namespace lrwb
