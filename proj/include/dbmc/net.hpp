#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "dbmc/client.hpp"
#include "dbmc/server.hpp"

namespace dbmc {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A listening TCP socket on 127.0.0.1 / INADDR_ANY; port 0 picks a free one.
class Listener {
 public:
  explicit Listener(std::uint16_t port, bool loopback_only = false);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  int fd() const { return fd_; }
  std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct ServeOptions {
  ServerConfig config;
  /// Wall-clock limit in seconds; 0 disables it. Exceeding it ends the run
  /// Inconclusive.
  double timeout = 0;
  bool verbose = false;
};

struct ServeResult {
  Verdict verdict = Verdict::Inconclusive;
  Trace trace;
  std::size_t partitions_created = 0;
  std::size_t dispatch_count = 0;
  std::size_t max_queue_depth = 0;
  std::map<ClientId, msg::Stats> stats;
};

/// Runs the coordinator event loop on newline-delimited JSON until a
/// verdict has been reached and the kill broadcast is flushed.
ServeResult serve(Listener& listener, const ServeOptions& options);

/// Parses "HOST:PORT".
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& s);

/// Connects and runs the client until KILL or until the server hangs up.
/// Link I/O is serviced between SISteps, so messages are handled in order.
void run_tcp_client(const CoreProgram& p, const ClientOptions& options, const std::string& host,
                    std::uint16_t port);

}  // namespace dbmc
