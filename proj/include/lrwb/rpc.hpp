#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "lrwb/config_table.hpp"
#include "lrwb/gbdt.hpp"

namespace lrwb {

// Frames on the wire are a u32 little-endian byte length followed by the body.
inline constexpr std::uint32_t kWireMagic = 0x4C525052;  // "RPRL" on the wire

struct WireRequest {
  std::uint64_t id = 0;
  std::vector<double> features;

  std::vector<std::uint8_t> encode() const;
  static WireRequest decode(std::span<const std::uint8_t> body);
};

enum class WireStatus : std::uint8_t { Ok = 0, SchemaMismatch = 1, ServerError = 2 };

struct WireResponse {
  std::uint64_t id = 0;
  WireStatus status = WireStatus::Ok;
  double probability = 0.0;

  std::vector<std::uint8_t> encode() const;
  static WireResponse decode(std::span<const std::uint8_t> body);
};

struct LatencyInjector {
  std::chrono::microseconds delay{0};
  std::chrono::microseconds jitter{0};  // uniform in [0, jitter]

  void validate() const;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"; a bare port means localhost.
  static Endpoint parse(std::string_view text);
  std::string to_string() const;
};

/// Second-stage model server. Each connection gets its own thread; the
/// injected delay runs before every response.
class Server {
 public:
  Server(std::shared_ptr<const GbdtModel> model, Endpoint bind, LatencyInjector injector = {},
         std::uint64_t seed = 0);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// The bound endpoint; port 0 at construction picks an ephemeral port.
  Endpoint endpoint() const { return bound_; }
  std::uint64_t requests() const noexcept { return requests_.load(); }
  void set_injector(LatencyInjector injector);

  /// Stops accepting, closes every connection and joins the threads.
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

 private:
  struct State;

  void accept_loop();
  void serve_connection(int fd);

  std::shared_ptr<const GbdtModel> model_;
  Endpoint bound_;
  std::unique_ptr<State> state_;
  std::atomic<std::uint64_t> requests_{0};
  std::thread acceptor_;
};

/// One connection to a Server. Not safe for concurrent callers.
class Client {
 public:
  explicit Client(const Endpoint& server, std::chrono::milliseconds timeout = std::chrono::milliseconds(1000));
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
  Client(Client&& other) noexcept;
  Client& operator=(Client&& other) noexcept;

  /// Throws Timeout, Disconnected or SchemaMismatch; never returns a
  /// probability for a different request.
  double predict(std::span<const double> row);
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    return predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }

  std::uint64_t last_id() const noexcept { return next_id_ - 1; }

 private:
  int fd_ = -1;
  std::uint64_t next_id_ = 1;
  std::chrono::milliseconds timeout_{1000};
};

inline double remote_predict(Client& client, std::span<const double> row) { return client.predict(row); }

enum class Stage : std::uint8_t { First, Second };

struct RoutedPrediction {
  double probability = 0.0;
  Stage stage = Stage::Second;
};

/// First stage on a hit with no network traffic, the remote GBDT otherwise.
RoutedPrediction multistage_predict(const FirstStageTable& first, Client& client,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& row);
RoutedPrediction multistage_predict(const LRwBinsModel& first, Client& client,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace lrwb
