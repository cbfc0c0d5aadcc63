#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dbmc/term.hpp"

namespace dbmc {

// ---------------------------------------------------------------------------
// Core IR: passified, loop-free, multi-procedure programs.
// ---------------------------------------------------------------------------

struct TypedVar {
  std::string name;
  Sort sort;
  friend bool operator==(const TypedVar&, const TypedVar&) = default;
};

struct Assume {
  Term expr;
  friend bool operator==(const Assume&, const Assume&) = default;
};

struct Call {
  std::string callee;
  std::vector<Term> actuals;
  friend bool operator==(const Call&, const Call&) = default;
};

using Statement = std::variant<Assume, Call>;

struct Goto {
  std::vector<std::string> targets;
  friend bool operator==(const Goto&, const Goto&) = default;
};

struct Return {
  friend bool operator==(const Return&, const Return&) = default;
};

using Terminator = std::variant<Goto, Return>;

struct Block {
  std::string label;
  std::vector<Statement> statements;
  Terminator terminator = Return{};

  /// The single call of this block, if any.
  const Call* call() const;
  bool is_return() const { return std::holds_alternative<Return>(terminator); }
  const std::vector<std::string>& successors() const;

  friend bool operator==(const Block&, const Block&) = default;
};

class Procedure {
 public:
  std::string name;
  std::vector<TypedVar> formals;
  std::vector<TypedVar> locals;
  std::string entry;

  const std::vector<Block>& blocks() const { return blocks_; }
  Block& add_block(Block b);
  const Block* find(const std::string& label) const;
  const Block& block(const std::string& label) const;
  Block& mutable_block(const std::string& label);

  /// Predecessor labels of every block, in block order.
  std::map<std::string, std::vector<std::string>> predecessors() const;
  /// Blocks in a topological order of the CFG; throws if the CFG is cyclic.
  std::vector<std::string> topological_order() const;

  friend bool operator==(const Procedure& a, const Procedure& b) {
    return a.name == b.name && a.formals == b.formals && a.locals == b.locals &&
           a.entry == b.entry && a.blocks_ == b.blocks_;
  }

 private:
  std::vector<Block> blocks_;
  std::map<std::string, std::size_t> index_;
};

class ProgramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CoreProgram {
  std::map<std::string, Procedure> procedures;

  const Procedure& procedure(const std::string& name) const;
  bool has(const std::string& name) const { return procedures.count(name) != 0; }

  /// Checks all IR invariants (acyclic CFGs and call graph, one call per
  /// block, goto targets, entry labels, call arity and sorts, `main` without
  /// formals). Throws ProgramError.
  void validate() const;

  friend bool operator==(const CoreProgram&, const CoreProgram&) = default;
};

std::string to_string(const CoreProgram& p);

// ---------------------------------------------------------------------------
// Callsites, call trees, decisions and partitions.
// ---------------------------------------------------------------------------

struct StaticCallsite {
  std::string label;
  std::string callee;
  auto operator<=>(const StaticCallsite&) const = default;
};

/// Reserved frame at the bottom of every dynamic callsite.
inline const StaticCallsite kMainFrame{"<entry>", "main"};

/// One static callsite per block.
std::set<StaticCallsite> callsites_of(const Procedure& p);

/// A runtime stack of static callsites; frames[0] is always the main frame.
/// Ordered lexicographically over frames, so prefixes sort first.
class DynamicCallsite {
 public:
  DynamicCallsite() : frames_{kMainFrame} {}
  static DynamicCallsite root() { return {}; }
  static DynamicCallsite from_frames(std::vector<StaticCallsite> frames);

  const std::vector<StaticCallsite>& frames() const { return frames_; }
  std::size_t depth() const { return frames_.size() - 1; }
  bool is_root() const { return frames_.size() == 1; }
  const StaticCallsite& top() const { return frames_.back(); }
  /// Procedure executed by this instance.
  const std::string& procedure() const { return top().callee; }
  DynamicCallsite parent() const;
  DynamicCallsite push(StaticCallsite s) const;
  /// True when this is a (non-strict) prefix of `other`.
  bool is_prefix_of(const DynamicCallsite& other) const;

  /// Canonical path string, e.g. "main/L1.foo/L5.bar".
  std::string path() const;

  /// For readable diagnostics, e.g. "[main,(L1,foo)]".
  std::string to_string() const;

  auto operator<=>(const DynamicCallsite&) const = default;

 private:
  std::vector<StaticCallsite> frames_;
};

using CallTree = std::set<DynamicCallsite>;
bool is_prefix_closed(const CallTree& t);

enum class DecisionKind { Avoid, MustReach };

struct Decision {
  DecisionKind kind;
  DynamicCallsite site;
  auto operator<=>(const Decision&) const = default;
};

std::string to_string(const Decision& d);

struct Partition {
  CallTree tree{DynamicCallsite::root()};
  std::set<Decision> decisions;

  static Partition root() { return {}; }
  Partition with(Decision d) const;
  Partition without(const Decision& d) const;
  /// Throws ProgramError when the tree is not prefix-closed, lacks the main
  /// frame, or a decision names a site outside the tree.
  void validate() const;
  /// Additionally checks that every tree node is a real callsite of `p`.
  void validate(const CoreProgram& p) const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// A sequence of (instance, block label) pairs from main's entry block to
/// main's return block.
struct TraceStep {
  DynamicCallsite instance;
  std::string label;
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};
using Trace = std::vector<TraceStep>;

bool trace_visits(const Trace& t, const DynamicCallsite& site);
std::string to_string(const Trace& t);

enum class Verdict { Safe, Unsafe, Inconclusive };
std::string_view verdict_name(Verdict v);

}  // namespace dbmc
