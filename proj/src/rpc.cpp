#include "lrwb/rpc.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <random>
#include <set>

#include "lrwb/error.hpp"

namespace lrwb {

namespace {

constexpr std::uint32_t kMaxFrame = 1u << 20;

template <std::unsigned_integral T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <std::unsigned_integral T>
T get(std::span<const std::uint8_t> in, std::size_t& at) {
  if (in.size() - at < sizeof(T)) throw Error(Errc::ProtocolError, "short frame");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[at + i]) << (8 * i));
  at += sizeof(T);
  return v;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

// Writes one length-prefixed frame.
bool send_frame(int fd, const std::vector<std::uint8_t>& body) {
  std::vector<std::uint8_t> frame;
  frame.reserve(body.size() + 4);
  put(frame, static_cast<std::uint32_t>(body.size()));
  frame.insert(frame.end(), body.begin(), body.end());
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const auto r = ::send(fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

enum class ReadStatus { Ok, Closed, TimedOut, Interrupted };

// Reads exactly `n` bytes, waiting on `fd` and optionally on `wake`.
ReadStatus read_exact(int fd, std::uint8_t* buf, std::size_t n, int wake,
                      std::optional<std::chrono::steady_clock::time_point> deadline) {
  std::size_t got = 0;
  while (got < n) {
    pollfd fds[2] = {{fd, POLLIN, 0}, {wake, POLLIN, 0}};
    int timeout = -1;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - std::chrono::steady_clock::now());
      if (left.count() < 0) return ReadStatus::TimedOut;
      timeout = static_cast<int>(left.count()) + 1;
    }
    const int ready = ::poll(fds, wake >= 0 ? 2 : 1, timeout);
    if (ready < 0 && errno == EINTR) continue;
    if (ready < 0) return ReadStatus::Closed;
    if (ready == 0) return ReadStatus::TimedOut;
    if (wake >= 0 && (fds[1].revents & POLLIN)) return ReadStatus::Interrupted;
    const auto r = ::recv(fd, buf + got, n - got, 0);
    if (r < 0 && (errno == EINTR || errno == EAGAIN)) continue;
    if (r <= 0) return ReadStatus::Closed;
    got += static_cast<std::size_t>(r);
  }
  return ReadStatus::Ok;
}

ReadStatus read_frame(int fd, std::vector<std::uint8_t>& body, int wake,
                      std::optional<std::chrono::steady_clock::time_point> deadline) {
  std::uint8_t len[4];
  auto s = read_exact(fd, len, 4, wake, deadline);
  if (s != ReadStatus::Ok) return s;
  std::size_t at = 0;
  const auto n = get<std::uint32_t>(std::span<const std::uint8_t>(len, 4), at);
  if (n > kMaxFrame) throw Error(Errc::ProtocolError, "frame too large");
  body.resize(n);
  return read_exact(fd, body.data(), n, wake, deadline);
}

}  // namespace

std::vector<std::uint8_t> WireRequest::encode() const {
  if (features.size() > 0xFFFF) throw Error(Errc::InvalidArgument, "too many features for one request");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 + 2 + 8 * features.size());
  put(out, kWireMagic);
  put(out, id);
  put(out, static_cast<std::uint16_t>(features.size()));
  for (const double v : features) put(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

WireRequest WireRequest::decode(std::span<const std::uint8_t> body) {
  std::size_t at = 0;
  if (get<std::uint32_t>(body, at) != kWireMagic) throw Error(Errc::ProtocolError, "bad request magic");
  WireRequest r;
  r.id = get<std::uint64_t>(body, at);
  const auto count = get<std::uint16_t>(body, at);
  r.features.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) r.features.push_back(std::bit_cast<double>(get<std::uint64_t>(body, at)));
  if (at != body.size()) throw Error(Errc::ProtocolError, "trailing bytes in request");
  return r;
}

std::vector<std::uint8_t> WireResponse::encode() const {
  std::vector<std::uint8_t> out;
  out.reserve(17);
  put(out, id);
  put(out, static_cast<std::uint8_t>(status));
  put(out, std::bit_cast<std::uint64_t>(probability));
  return out;
}

WireResponse WireResponse::decode(std::span<const std::uint8_t> body) {
  std::size_t at = 0;
  WireResponse r;
  r.id = get<std::uint64_t>(body, at);
  const auto status = get<std::uint8_t>(body, at);
  if (status > 2) throw Error(Errc::ProtocolError, "bad response status");
  r.status = static_cast<WireStatus>(status);
  r.probability = std::bit_cast<double>(get<std::uint64_t>(body, at));
  if (at != body.size()) throw Error(Errc::ProtocolError, "trailing bytes in response");
  return r;
}

void LatencyInjector::validate() const {
  if (delay.count() < 0 || jitter.count() < 0) throw Error(Errc::InvalidArgument, "latency and jitter must be >= 0");
}

Endpoint Endpoint::parse(std::string_view text) {
  Endpoint e;
  std::string_view port = text;
  const auto colon = text.rfind(':');
  if (colon != std::string_view::npos) {
    e.host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
  }
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
    throw Error(Errc::InvalidArgument, "bad endpoint '" + std::string(text) + "'");
  }
  if (e.host.empty()) e.host = "127.0.0.1";
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

// ---- server --------------------------------------------------------------

struct Server::State {
  int listen_fd = -1;
  int wake[2] = {-1, -1};
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopping = false;
  LatencyInjector injector;
  std::uint64_t seed = 0;
  std::uint64_t connections = 0;
  std::set<int> open;
  std::vector<std::thread> workers;
};

Server::Server(std::shared_ptr<const GbdtModel> model, Endpoint bind, LatencyInjector injector, std::uint64_t seed)
    : model_(std::move(model)), bound_(bind), state_(std::make_unique<State>()) {
  injector.validate();
  state_->injector = injector;
  state_->seed = seed;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto port = std::to_string(bind.port);
  if (::getaddrinfo(bind.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(Errc::BindFailed, "cannot resolve " + bind.to_string());
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const bool ok = fd >= 0 && ::bind(fd, res->ai_addr, res->ai_addrlen) == 0 && ::listen(fd, 64) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    const std::string why = std::strerror(errno);
    if (fd >= 0) ::close(fd);
    throw Error(Errc::BindFailed, "cannot listen on " + bind.to_string() + ": " + why);
  }
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_.port = ntohs(addr.sin_port);
  state_->listen_fd = fd;
  if (::pipe(state_->wake) != 0) {
    ::close(fd);
    throw Error(Errc::BindFailed, "cannot create wake pipe");
  }
  acceptor_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::set_injector(LatencyInjector injector) {
  injector.validate();
  std::lock_guard lock(state_->mutex);
  state_->injector = injector;
}

void Server::accept_loop() {
  for (;;) {
    pollfd fds[2] = {{state_->listen_fd, POLLIN, 0}, {state_->wake[0], POLLIN, 0}};
    const int ready = ::poll(fds, 2, -1);
    if (ready < 0 && errno == EINTR) continue;
    if (ready < 0 || (fds[1].revents & POLLIN)) return;
    const int conn = ::accept(state_->listen_fd, nullptr, nullptr);
    if (conn < 0) continue;
    set_nodelay(conn);
    std::lock_guard lock(state_->mutex);
    if (state_->stopping) {
      ::close(conn);
      return;
    }
    state_->open.insert(conn);
    state_->workers.emplace_back([this, conn] { serve_connection(conn); });
  }
}

void Server::serve_connection(int fd) {
  std::mt19937_64 rng;
  {
    std::lock_guard lock(state_->mutex);
    rng.seed(state_->seed + 0x9E3779B97F4A7C15ULL * ++state_->connections);
  }
  std::vector<std::uint8_t> body;
  try {
    while (read_frame(fd, body, state_->wake[0], std::nullopt) == ReadStatus::Ok) {
      const auto request = WireRequest::decode(body);
      WireResponse response;
      response.id = request.id;
      try {
        if (request.features.size() != model_->schema.size()) {
          response.status = WireStatus::SchemaMismatch;
        } else {
          const Eigen::Map<const Eigen::RowVectorXd> row(request.features.data(),
                                                        static_cast<Eigen::Index>(request.features.size()));
          response.probability = model_->predict(row);
        }
      } catch (const std::exception&) {
        response.status = WireStatus::ServerError;
      }
      requests_.fetch_add(1);

      std::unique_lock lock(state_->mutex);
      auto wait = state_->injector.delay;
      if (state_->injector.jitter.count() > 0) {
        std::uniform_int_distribution<std::int64_t> jitter(0, state_->injector.jitter.count());
        wait += std::chrono::microseconds(jitter(rng));
      }
      if (wait.count() > 0 && state_->stopped_cv.wait_for(lock, wait, [&] { return state_->stopping; })) break;
      lock.unlock();
      if (!send_frame(fd, response.encode())) break;
    }
  } catch (const Error&) {
    // Malformed frame: drop the connection.
  }
  std::lock_guard lock(state_->mutex);
  if (state_->open.erase(fd)) ::close(fd);
}

void Server::stop() {
  if (!state_) return;
  {
    std::lock_guard lock(state_->mutex);
    if (state_->stopping) return;
    state_->stopping = true;
    for (const int fd : state_->open) ::shutdown(fd, SHUT_RDWR);
  }
  state_->stopped_cv.notify_all();
  const char byte = 1;
  [[maybe_unused]] const auto w = ::write(state_->wake[1], &byte, 1);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(state_->mutex);
    workers.swap(state_->workers);
  }
  for (auto& t : workers) t.join();
  {
    std::lock_guard lock(state_->mutex);
    for (const int fd : state_->open) ::close(fd);
    state_->open.clear();
  }
  ::close(state_->listen_fd);
  ::close(state_->wake[0]);
  ::close(state_->wake[1]);
}

void Server::wait() {
  std::unique_lock lock(state_->mutex);
  state_->stopped_cv.wait(lock, [&] { return state_->stopping; });
}

// ---- client --------------------------------------------------------------

Client::Client(const Endpoint& server, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(server.port);
  if (::getaddrinfo(server.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(Errc::Disconnected, "cannot resolve " + server.to_string());
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw Error(Errc::Disconnected, "cannot connect to " + server.to_string());
  }
  set_nodelay(fd_);
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  timeout_ = timeout;
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

Client::Client(Client&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), next_id_(other.next_id_), timeout_(other.timeout_) {}

Client& Client::operator=(Client&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    next_id_ = other.next_id_;
    timeout_ = other.timeout_;
  }
  return *this;
}

double Client::predict(std::span<const double> row) {
  if (fd_ < 0) throw Error(Errc::Disconnected, "client is not connected");
  WireRequest request;
  request.id = next_id_++;
  request.features.assign(row.begin(), row.end());
  if (!send_frame(fd_, request.encode())) throw Error(Errc::Disconnected, "send failed");

  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  std::vector<std::uint8_t> body;
  for (;;) {
    switch (read_frame(fd_, body, -1, deadline)) {
      case ReadStatus::Ok: break;
      case ReadStatus::TimedOut: throw Error(Errc::Timeout, "no response within the timeout");
      default: throw Error(Errc::Disconnected, "server closed the connection");
    }
    const auto response = WireResponse::decode(body);
    // Late answers to requests that already timed out are skipped.
    if (response.id < request.id) continue;
    if (response.id != request.id) throw Error(Errc::ProtocolError, "response id from the future");
    switch (response.status) {
      case WireStatus::Ok: return response.probability;
      case WireStatus::SchemaMismatch:
        throw Error(Errc::SchemaMismatch, "server expects a different feature count than " + std::to_string(row.size()));
      case WireStatus::ServerError: throw Error(Errc::ProtocolError, "server failed to score the row");
    }
  }
}

RoutedPrediction multistage_predict(const FirstStageTable& first, Client& client,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (const auto p = first.predict(row)) return {*p, Stage::First};
  return {client.predict(row), Stage::Second};
}

RoutedPrediction multistage_predict(const LRwBinsModel& first, Client& client,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (const auto p = first.predict(row)) return {*p, Stage::First};
  return {client.predict(row), Stage::Second};
}

}  // namespace lrwb
