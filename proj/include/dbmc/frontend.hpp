#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dbmc/program.hpp"

namespace dbmc {

struct SourcePos {
  int line = 1;
  int column = 1;
};

class FrontendError : public std::runtime_error {
 public:
  enum class Kind { Syntax, Sort, Undefined, Lowering };
  FrontendError(Kind kind, SourcePos pos, const std::string& msg);
  Kind kind() const { return kind_; }
  SourcePos pos() const { return pos_; }

 private:
  Kind kind_;
  SourcePos pos_;
};

namespace surface {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { IntLit, BoolLit, Var, Unary, Binary, Ite };
  Kind kind;
  SourcePos pos;
  Sort sort = Sort::Int;     // filled in by the sort checker
  std::int64_t value = 0;    // IntLit / BoolLit
  std::string name;          // Var name or operator spelling
  std::vector<ExprPtr> args;
};

struct Stmt {
  enum class Kind { Assign, Assume, Assert, If, While, Call, Block };
  Kind kind;
  SourcePos pos;
  std::optional<std::string> label;  // `L: stmt` names the block starting here
  std::string name;                  // assigned variable or callee
  ExprPtr expr;                      // assigned value / assumed / asserted; null condition means `*`
  std::vector<ExprPtr> args;         // call actuals
  std::vector<Stmt> body;            // then-branch, loop body, or nested block
  std::vector<Stmt> else_body;
};

struct ProcDecl {
  std::string name;
  SourcePos pos;
  std::vector<TypedVar> formals;
  std::vector<TypedVar> locals;
  std::vector<Stmt> body;
};

struct SurfaceProgram {
  std::vector<ProcDecl> procedures;
  const ProcDecl* find(std::string_view name) const;
};

}  // namespace surface

using surface::SurfaceProgram;

/// Parses and checks a `.dbmc` source: syntax, declarations, and sorts.
SurfaceProgram parse(std::string_view text);

/// Unrolls loops and recursion `unroll_depth` times, passifies assignments
/// and lowers assertions so that main's return is reachable iff some
/// assertion can fail.
CoreProgram lower(const SurfaceProgram& sp, int unroll_depth);

/// parse + lower.
CoreProgram compile(std::string_view text, int unroll_depth);

/// Reads a file into a string; throws std::runtime_error.
std::string read_file(const std::string& path);

/// Formal appended to procedures whose execution can fail an assertion.
inline constexpr std::string_view kErrorFormal = "$err";

}  // namespace dbmc
