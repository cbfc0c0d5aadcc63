#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "dbmc/protocol.hpp"
#include "dbmc/si.hpp"
#include "dbmc/splitting.hpp"

namespace dbmc {

struct ClientOptions {
  ClientId id = 0;
  Strategy strategy = Strategy::ProofGuided;
  std::uint64_t seed = 0;
  bool splitting = true;
  std::optional<std::size_t> max_splits;
  double delta_c = kDefaultDeltaC;
  double k = kDefaultK;
  /// Virtual seconds per SIStep; 0 selects the steady clock.
  double virtual_tick = 0.0;
  SolverOptions solver;
};

/// A split made by a client: the partition it was working on and the site.
struct SplitRecord {
  ClientId client;
  Partition parent;
  DynamicCallsite site;
};

/// A must-reach partition taken back by its creator, and the verdict the
/// creator reached for the remainder of its work after the flip.
struct StealRecord {
  Partition partition;
  Verdict verdict;
};

/// The client verification loop as an event-driven state machine. Replies
/// arrive through on_message(), solver work happens in step(), and outgoing
/// messages leave through the outbox.
class ClientEngine {
 public:
  using Outbox = std::function<void(const Message&)>;
  enum class Phase { Idle, NeedPartition, Working, AwaitPop, Done };

  ClientEngine(const CoreProgram& program, ClientOptions options, Outbox outbox);
  ~ClientEngine();
  ClientEngine(const ClientEngine&) = delete;
  ClientEngine& operator=(const ClientEngine&) = delete;

  /// Sends HELLO and the first GET_PARTITION.
  void start();
  void on_message(const Message& m);
  /// One SIStep plus outcome handling and the split check.
  void step();

  Phase phase() const { return phase_; }
  bool runnable() const { return phase_ == Phase::Working; }
  bool done() const { return phase_ == Phase::Done; }

  ClientId id() const { return options_.id; }
  std::uint64_t splits() const { return splits_; }
  std::uint64_t solved() const { return solved_; }
  std::uint64_t steps() const { return steps_; }
  const std::set<DynamicCallsite>& inlined_sites() const { return inlined_union_; }
  const std::vector<SplitRecord>& split_records() const { return split_records_; }
  const std::vector<StealRecord>& steal_records() const { return steal_records_; }
  double delta() const { return policy_.delta; }
  /// Set while working; push depth above the partition baseline equals its size.
  std::size_t dstack_size() const { return dstack_.size(); }
  const Partition& partition() const { return rho_; }
  const SIState* state() const { return st_ ? &*st_ : nullptr; }
  const SolverSession* session() const { return session_.get(); }

 private:
  struct Entry {
    Decision decision;
    SIState snapshot;
    Partition rho_before;
  };

  double now() const;
  void send(const Message& m) { outbox_(m); }
  void begin(const Partition& rho);
  void finish(Verdict v, const Trace& trace);
  void steal_back();
  void maybe_split();
  void hand_over_stats();

  const CoreProgram& program_;
  ClientOptions options_;
  Outbox outbox_;
  Phase phase_ = Phase::Idle;
  std::unique_ptr<SolverSession> session_;
  std::optional<SIState> st_;
  Partition rho_;
  std::vector<Entry> dstack_;
  SplitPolicy policy_;
  std::mt19937_64 rng_;
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();
  std::uint64_t steps_ = 0;
  std::uint64_t splits_ = 0;
  std::uint64_t solved_ = 0;
  std::set<DynamicCallsite> inlined_union_;
  std::vector<SplitRecord> split_records_;
  std::vector<StealRecord> steal_records_;
  std::optional<Partition> stolen_;
};

}  // namespace dbmc
