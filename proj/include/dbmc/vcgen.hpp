#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbmc/program.hpp"
#include "dbmc/term.hpp"

namespace dbmc {

struct AssertionOrigin {
  enum class Kind { Root, InlinedSite, BlockedSite, Decision };
  Kind kind = Kind::Root;
  DynamicCallsite site;
  std::optional<Decision> decision;

  static AssertionOrigin root() { return {}; }
  static AssertionOrigin inlined(DynamicCallsite c) { return {Kind::InlinedSite, std::move(c), {}}; }
  static AssertionOrigin blocked(DynamicCallsite c) { return {Kind::BlockedSite, std::move(c), {}}; }
  static AssertionOrigin of_decision(Decision d) { return {Kind::Decision, d.site, d}; }
};

struct NamedAssertion {
  std::string name;
  Term term;
  AssertionOrigin origin;
};

/// Canonical assertion names.
std::string inlined_name(const DynamicCallsite& c);  // "inl!<path>"
std::string blocked_name(const DynamicCallsite& c);  // "blk!<path>"
std::string decision_name(std::uint64_t n);          // "dec!<n>"

/// The conjuncts of a partial VC, in block order after the entry conjunct.
struct PartialVC {
  DynamicCallsite site;
  std::vector<Term> conjuncts;
  Term formula() const { return mk_and(conjuncts); }
};

/// Symbol vocabulary for one client's run: block ids, control and
/// must-reach variables, local renaming, and the actuals at each call.
///
/// Copyable so that the client can snapshot and later roll back the
/// per-instance tables; the counters never move backwards.
class VCContext {
 public:
  explicit VCContext(const CoreProgram* program) : program_(program) {}

  const CoreProgram& program() const { return *program_; }

  /// Builds the partial VC of `p` instantiated at `c`, with formals
  /// replaced by `actuals`. Allocates fresh ids and symbols for `c`.
  PartialVC pvc(const Procedure& p, const DynamicCallsite& c, const std::vector<Term>& actuals);

  /// pvc of the procedure executed at `c`, with the actuals recorded at the
  /// call in the parent instance (none for the root).
  PartialVC pvc(const DynamicCallsite& c);

  bool has_instance(const DynamicCallsite& c) const { return instances_.count(c) != 0; }
  std::size_t instance_count() const { return instances_.size(); }

  std::int64_t block_id(const DynamicCallsite& c, const std::string& label) const;
  Term control_var(const DynamicCallsite& c, const std::string& label) const;
  Term must_reach_var(const DynamicCallsite& c, const std::string& label) const;
  /// The control variable of the block that makes the call `c`.
  Term cvar(const DynamicCallsite& c) const;
  /// Actual-argument terms at the call `c`, as seen in the parent instance.
  const std::vector<Term>& interface_vars(const DynamicCallsite& c) const;

  /// Conjunction over blocks l of r_l => OR_{n in pred(l)} (r_n & f(i_n) == i_l).
  Term mr_proc(const DynamicCallsite& c) const;
  /// r-anchor at the calling block, conjoined with mr_proc of every strict
  /// prefix instance. `true` for the root.
  Term mr_chain(const DynamicCallsite& c) const;
  Term avoid_constraint(const DynamicCallsite& c) const;
  Term decision_constraint(const Decision& d) const;

  /// Restore the per-instance tables from `snapshot` but keep this context's
  /// counters, so symbols allocated later are still fresh.
  void rollback_to(const VCContext& snapshot);

 private:
  struct Instance {
    std::string procedure;
    std::uint64_t number = 0;
    std::map<std::string, std::int64_t> block_ids;
    std::map<std::string, std::vector<Term>> call_actuals;  // by calling block label
  };
  const Instance& instance(const DynamicCallsite& c) const;

  const CoreProgram* program_;
  std::map<DynamicCallsite, Instance> instances_;
  std::uint64_t next_instance_ = 0;
  std::int64_t next_block_id_ = 0;
};

class VCError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dbmc
