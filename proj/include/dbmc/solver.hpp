#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbmc/term.hpp"

namespace dbmc {

/// Solver misuse or an error reply from the solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The solver process died, hung, or produced unparseable output. Distinct
/// from an `unknown` answer.
class SessionFailed : public SolverError {
 public:
  using SolverError::SolverError;
};

/// `$DBMC_SOLVER` if set, otherwise "z3 -in".
std::string default_solver_command();

struct SolverOptions {
  std::string command = default_solver_command();
  std::chrono::milliseconds timeout{60'000};
  /// Extra time granted beyond `timeout` before the process is declared hung.
  std::chrono::milliseconds grace{10'000};
  bool minimize_cores = true;
};

enum class CheckStatus { Sat, Unsat, Unknown };

struct CheckResult {
  CheckStatus status = CheckStatus::Unknown;
  std::set<std::string> core;  // Unsat only
  std::string reason;          // Unknown only; "timeout" for exceeded limits

  bool sat() const { return status == CheckStatus::Sat; }
  bool unsat() const { return status == CheckStatus::Unsat; }
  bool unknown() const { return status == CheckStatus::Unknown; }
};

/// Minimal s-expression, as read from the solver.
struct SExpr {
  bool is_list = false;
  std::string atom;
  std::vector<SExpr> list;
  std::string to_string() const;
};

/// Parses one s-expression; throws SolverError on malformed input.
SExpr parse_sexpr(std::string_view text);

/// Incremental SMT-LIB2 session over an external solver process in
/// QF_UFLIA with the control-flow function declared. Free variables of
/// asserted terms are declared on first use, in the current scope.
class SolverSession {
 public:
  explicit SolverSession(SolverOptions options = {});
  ~SolverSession();
  SolverSession(const SolverSession&) = delete;
  SolverSession& operator=(const SolverSession&) = delete;

  void assert_named(const std::string& name, const Term& t);
  void push();
  void pop();
  /// Back to the state right after start-up: no assertions, no declarations
  /// beyond f, depth 0.
  void reset();
  CheckResult check();
  /// Values of Int or Bool terms in the last Sat model (bools as 0/1).
  std::vector<std::int64_t> values(const std::vector<Term>& terms);

  std::size_t depth() const { return names_.size() - 1; }
  bool has_name(const std::string& name) const;
  /// Names asserted and not yet popped, in assertion order.
  std::vector<std::string> active_names() const;
  bool core_minimization() const { return minimize_; }
  const std::string& solver_name() const { return solver_name_; }
  std::uint64_t check_count() const { return checks_; }

 private:
  struct Process;

  void initialize();
  void send(const std::string& cmd);
  void command(const std::string& cmd);  // expects `success`
  void sync();
  SExpr read();
  void declare(const Term& t);

  SolverOptions options_;
  std::unique_ptr<Process> proc_;
  std::size_t pending_ = 0;
  std::vector<std::set<std::string>> decls_{1};
  std::vector<std::vector<std::string>> names_{1};
  bool last_sat_ = false;
  bool minimize_ = false;
  std::string solver_name_;
  std::uint64_t checks_ = 0;
};

std::string_view check_status_name(CheckStatus s);

}  // namespace dbmc
