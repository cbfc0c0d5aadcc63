#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dbmc {

enum class Sort { Bool, Int };

std::string_view sort_name(Sort s);

enum class Op {
  BoolLit,
  IntLit,
  Var,
  Not,
  And,
  Or,
  Implies,
  Eq,
  Ite,
  Add,
  Sub,
  Mul,
  Neg,
  Lt,
  Le,
  Gt,
  Ge,
  // Application of the control-flow function f : Int -> Int.
  ControlFlow,
};

/// Immutable, sorted expression tree over {Bool, Int}.
///
/// Terms are cheap to copy (shared ownership of an immutable node) and are
/// compared structurally. The only function symbol is the control-flow
/// function, see mk_control_flow().
class Term {
 public:
  Term();  // the literal `true`

  Op op() const { return node_->op; }
  Sort sort() const { return node_->sort; }
  std::int64_t int_value() const { return node_->value; }
  bool bool_value() const { return node_->value != 0; }
  const std::string& name() const { return node_->name; }
  const std::vector<Term>& args() const { return node_->args; }
  const Term& arg(std::size_t i) const { return node_->args.at(i); }

  bool is_true() const { return op() == Op::BoolLit && bool_value(); }
  bool is_false() const { return op() == Op::BoolLit && !bool_value(); }

  friend bool operator==(const Term& a, const Term& b);
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }

 private:
  struct Node {
    Op op;
    Sort sort;
    std::int64_t value = 0;
    std::string name;
    std::vector<Term> args;
  };
  explicit Term(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Term make(Op op, Sort sort, std::vector<Term> args, std::int64_t value = 0,
                   std::string name = {});

  std::shared_ptr<const Node> node_;

  friend Term mk_bool(bool);
  friend Term mk_int(std::int64_t);
  friend Term mk_var(std::string, Sort);
  friend Term mk_not(Term);
  friend Term mk_and(std::vector<Term>);
  friend Term mk_or(std::vector<Term>);
  friend Term mk_implies(Term, Term);
  friend Term mk_eq(Term, Term);
  friend Term mk_ite(Term, Term, Term);
  friend Term mk_arith(Op, Term, Term);
  friend Term mk_neg(Term);
  friend Term mk_cmp(Op, Term, Term);
  friend Term mk_control_flow(Term);
};

class SortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Term mk_bool(bool v);
inline Term mk_true() { return mk_bool(true); }
inline Term mk_false() { return mk_bool(false); }
Term mk_int(std::int64_t v);
Term mk_var(std::string name, Sort sort);
Term mk_not(Term t);
// n-ary connectives collapse: mk_and({}) is true, mk_and({t}) is t. No other
// simplification is performed, so the shape of a built term is predictable.
Term mk_and(std::vector<Term> ts);
Term mk_or(std::vector<Term> ts);
Term mk_implies(Term lhs, Term rhs);
Term mk_eq(Term a, Term b);
Term mk_ite(Term c, Term a, Term b);
Term mk_arith(Op op, Term a, Term b);  // Add, Sub, Mul
inline Term mk_add(Term a, Term b) { return mk_arith(Op::Add, std::move(a), std::move(b)); }
inline Term mk_sub(Term a, Term b) { return mk_arith(Op::Sub, std::move(a), std::move(b)); }
inline Term mk_mul(Term a, Term b) { return mk_arith(Op::Mul, std::move(a), std::move(b)); }
Term mk_neg(Term t);
Term mk_cmp(Op op, Term a, Term b);  // Lt, Le, Gt, Ge
Term mk_control_flow(Term arg);
inline Term mk_control_flow(std::int64_t block_id) { return mk_control_flow(mk_int(block_id)); }

/// Name of the control-flow function symbol in SMT-LIB output.
inline constexpr std::string_view kControlFlowSymbol = "f";

/// Replace variables by name. Variables not in the map are kept.
Term substitute(const Term& t, const std::map<std::string, Term>& subst);

/// Collect free variables (name -> sort).
void collect_vars(const Term& t, std::map<std::string, Sort>& out);

/// SMT-LIB2 rendering of a symbol, quoted with |...| when needed.
std::string smt_symbol(std::string_view name);
std::string to_smt(const Term& t);
std::string to_string(const Term& t);  // same as to_smt

}  // namespace dbmc
