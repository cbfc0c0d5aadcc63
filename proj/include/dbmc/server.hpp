#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "dbmc/protocol.hpp"
#include "dbmc/splitting.hpp"

namespace dbmc {

struct ServerConfig {
  std::size_t clients_expected = 1;
  double delta_c = kDefaultDeltaC;
  double k = kDefaultK;
};

struct Outgoing {
  ClientId to;
  Message msg;
};

/// The coordinator as a pure state machine: every handler runs to
/// completion and returns the replies to send.
class ServerState {
 public:
  /// A queued partition with its server-side sequence number (0 is the root).
  struct Entry {
    std::uint64_t seq;
    Partition partition;
  };
  enum class Fate { Queued, Dispatched, Popped };

  explicit ServerState(ServerConfig config = {}) : config_(config) {}

  std::vector<Outgoing> handle(ClientId from, const Message& m);
  /// The transport lost `id`. Idle clients are deregistered and their queued
  /// partitions stay available to others; losing a busy client loses its
  /// partition, so the run ends Inconclusive.
  std::vector<Outgoing> disconnect(ClientId id);
  /// Ends an unfinished run as Inconclusive.
  std::vector<Outgoing> abort();

  const std::optional<Verdict>& verdict() const { return verdict_; }
  const Trace& trace() const { return trace_; }
  const std::set<ClientId>& registered() const { return registered_; }
  const std::deque<ClientId>& waiting() const { return wt_; }
  const std::deque<Entry>& queue(ClientId id) const;
  bool root_pending() const { return root_pending_; }

  std::size_t max_queue_depth() const { return max_queue_depth_; }
  std::size_t dispatch_count() const { return dispatches_; }
  std::size_t partitions_created() const { return created_; }
  /// Life cycle of every partition that entered a queue, by sequence number.
  const std::map<std::uint64_t, Fate>& ledger() const { return ledger_; }
  /// Partition dispatched to each client, in order, with sequence numbers.
  const std::vector<std::pair<ClientId, std::uint64_t>>& grants() const { return grants_; }
  const std::map<ClientId, msg::Stats>& stats() const { return stats_; }

 private:
  void require_registered(ClientId id) const;
  void dispatch(std::vector<Outgoing>& out);
  void check_termination(std::vector<Outgoing>& out);
  void finish(Verdict v, std::vector<Outgoing>& out);

  ServerConfig config_;
  std::map<ClientId, std::deque<Entry>> q_;
  std::deque<ClientId> wt_;
  std::set<ClientId> registered_;
  bool root_pending_ = true;
  std::optional<Verdict> verdict_;
  Trace trace_;
  std::uint64_t next_seq_ = 1;
  std::size_t max_queue_depth_ = 0;
  std::size_t dispatches_ = 0;
  std::size_t created_ = 0;
  std::map<std::uint64_t, Fate> ledger_;
  std::vector<std::pair<ClientId, std::uint64_t>> grants_;
  std::map<ClientId, msg::Stats> stats_;
};

}  // namespace dbmc
