#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dbmc/client.hpp"
#include "dbmc/program.hpp"
#include "dbmc/server.hpp"
#include "dbmc/si.hpp"

namespace dbmc {

/// Inline the whole call tree eagerly and decide with one check.
SIResult full_inline_oracle(const CoreProgram& p, SolverSession& session);

struct CorpusShape {
  int depth = 3;             // procedure levels below main
  int fanout = 2;            // call statements per procedure, at most
  int procs_per_level = 2;
  double branch_prob = 0.5;
  double call_prob = 0.6;
  double assert_density = 0.3;
  double unsafe_prob = 0.5;
  std::size_t max_sites = 40;
};

/// Deterministic `.dbmc` sources of acyclic multi-procedure programs.
/// Every procedure takes (a: int, r: int) and guarantees r >= a; main ends
/// with an assertion on its final value that is violated by construction
/// in roughly `unsafe_prob` of the programs.
std::vector<std::string> gen_corpus(std::uint64_t seed, std::size_t n, const CorpusShape& shape = {});

/// Number of dynamic callsites in the full call tree (the root excluded).
std::size_t call_tree_size(const CoreProgram& p);

/// 1 - |Li ∩ Lj| / |Li|; absent when Li is empty.
std::optional<double> dissimilarity(const std::set<DynamicCallsite>& li, const std::set<DynamicCallsite>& lj);

struct ClientReport {
  ClientId id = 0;
  std::set<DynamicCallsite> inlined;
  std::uint64_t splits = 0;
  std::uint64_t solved = 0;
  std::uint64_t steps = 0;
};

struct RunReport {
  Verdict verdict = Verdict::Inconclusive;
  Trace trace;
  double wall_seconds = 0;
  /// Longest causal chain of SISteps, in virtual seconds.
  double virtual_makespan = 0;
  std::vector<ClientReport> clients;
  std::size_t max_queue_depth = 0;
  std::size_t dispatch_count = 0;
  std::size_t partitions_created = 0;
  std::size_t events = 0;
  std::vector<SplitRecord> splits;
  std::vector<StealRecord> steals;
  /// Every partition dispatched or popped at most once, and none left
  /// queued when the verdict is Safe.
  bool conservation_ok = true;
  std::string note;

  std::uint64_t total_solved() const;
};

struct ClusterOptions {
  std::size_t clients = 1;
  Strategy strategy = Strategy::ProofGuided;
  std::uint64_t seed = 0;
  double delta_c = kDefaultDeltaC;
  double k = kDefaultK;
  bool splitting = true;
  std::optional<std::size_t> max_splits;
  std::size_t max_events = 2'000'000;
  SolverOptions solver;
};

/// Server and clients in one process under a seeded scheduler that picks
/// uniformly among enabled events: delivering the head of a per-client
/// FIFO channel in either direction, or one step of a working client.
/// Messages cross the channels serialized. The virtual clock ticks delta_c
/// per SIStep.
RunReport run_simulated(const CoreProgram& p, const ClusterOptions& options);

/// Solve `rho` with a fresh client that does not split, fed the partition
/// through the wire encoding.
Verdict solve_with_fresh_client(const CoreProgram& p, const Partition& rho, const SolverOptions& solver = {});

/// One row per (program, configuration) of the report verb.
struct ReportRow {
  std::string program;
  std::string config;
  std::uint64_t seed;
  Verdict verdict;
  double virtual_makespan;
  double wall_seconds;
  std::uint64_t splits;
};

}  // namespace dbmc
