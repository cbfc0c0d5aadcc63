#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>

#include "dbmc/program.hpp"
#include "dbmc/solver.hpp"
#include "dbmc/vcgen.hpp"

namespace dbmc {

class SIError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stratified-inlining state over one solver session. Copyable (the session
/// is referenced, not owned) so that a client can snapshot it.
struct SIState {
  const CoreProgram* program = nullptr;
  SolverSession* session = nullptr;
  VCContext ctx{nullptr};
  std::set<DynamicCallsite> open;
  CallTree inlined;
  std::map<std::string, AssertionOrigin> origins;
  /// Callsites of the last under-approximate unsat core.
  std::set<DynamicCallsite> uc;
  std::uint64_t next_decision = 0;
  std::uint64_t inline_assertions = 0;

  /// Restore from an earlier copy, keeping counters monotonic.
  void rollback_to(const SIState& snapshot);
};

struct SIOutcome {
  enum class Kind { Safe, Unsafe, NoDecision, Inconclusive };
  Kind kind = Kind::Inconclusive;
  Trace trace;                           // Unsafe, or the over-approximate path
  std::set<DynamicCallsite> uc;          // NoDecision
  std::set<DynamicCallsite> inlined_now; // NoDecision
  std::set<DynamicCallsite> open;        // NoDecision: open set afterwards
  CheckStatus under = CheckStatus::Unknown;
  std::optional<CheckStatus> over;       // absent when the under-approximation decided
  std::string reason;                    // Inconclusive
};

std::string_view outcome_name(SIOutcome::Kind k);

/// Asserts the root partial VC in a fresh session.
SIState init_state(const CoreProgram& p, SolverSession& session);

/// Inlines the open callsite `c`; returns the callsites it opens.
std::set<DynamicCallsite> inline_site(SIState& st, DynamicCallsite c);

/// Asserts a partition decision as `dec!<n>`.
void assert_decision(SIState& st, const Decision& d);

/// One round: under-approximate check with open sites blocked, then the
/// over-approximate check; inlines the open sites on the trace.
SIOutcome si_step(SIState& st);

/// Reads the interprocedural path out of the current Sat model.
Trace extract_trace(SIState& st);

/// Resets the session and rebuilds the partition's state: every tree member
/// inlined in prefix order, then every decision asserted. No pushes.
SIState setup_partition(const CoreProgram& p, SolverSession& session, const Partition& rho);

struct SIResult {
  Verdict verdict = Verdict::Inconclusive;
  Trace trace;
  std::size_t rounds = 0;
  CallTree inlined;
  std::string reason;
};

/// Called once after setup with round 0 and no outcome, then after every round.
using StepObserver = std::function<void(std::size_t round, const SIState&, const SIOutcome*)>;

/// Loops si_step on a partition until a decision; no splitting.
SIResult solve_partition(const CoreProgram& p, SolverSession& session, const Partition& rho,
                         const StepObserver& observer = {});

/// The baseline engine: solve_partition on the root partition.
SIResult run_sequential(const CoreProgram& p, SolverSession& session, const StepObserver& observer = {});

/// Calls made on a trace, as dynamic callsites.
std::set<DynamicCallsite> trace_callsites(const CoreProgram& p, const Trace& t);

}  // namespace dbmc
