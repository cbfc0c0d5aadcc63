#include "dbmc/term.hpp"

#include <sstream>

namespace dbmc {

std::string_view sort_name(Sort s) { return s == Sort::Bool ? "Bool" : "Int"; }

Term::Term() : Term(mk_true()) {}

Term Term::make(Op op, Sort sort, std::vector<Term> args, std::int64_t value, std::string name) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->sort = sort;
  n->value = value;
  n->name = std::move(name);
  n->args = std::move(args);
  return Term(std::move(n));
}

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op() || a.sort() != b.sort() || a.int_value() != b.int_value() ||
      a.name() != b.name() || a.args().size() != b.args().size())
    return false;
  for (std::size_t i = 0; i < a.args().size(); ++i)
    if (a.args()[i] != b.args()[i]) return false;
  return true;
}

namespace {

void expect(const Term& t, Sort s, std::string_view what) {
  if (t.sort() != s)
    throw SortError(std::string(what) + ": expected " + std::string(sort_name(s)) + ", got " +
                    std::string(sort_name(t.sort())) + " in " + to_smt(t));
}

}  // namespace

Term mk_bool(bool v) {
  // The two boolean literals are shared.
  static const Term t = Term::make(Op::BoolLit, Sort::Bool, {}, 1);
  static const Term f = Term::make(Op::BoolLit, Sort::Bool, {}, 0);
  return v ? t : f;
}

Term mk_int(std::int64_t v) { return Term::make(Op::IntLit, Sort::Int, {}, v); }

Term mk_var(std::string name, Sort sort) {
  if (name.empty()) throw SortError("empty variable name");
  return Term::make(Op::Var, sort, {}, 0, std::move(name));
}

Term mk_not(Term t) {
  expect(t, Sort::Bool, "not");
  return Term::make(Op::Not, Sort::Bool, {std::move(t)});
}

Term mk_and(std::vector<Term> ts) {
  for (const auto& t : ts) expect(t, Sort::Bool, "and");
  if (ts.empty()) return mk_true();
  if (ts.size() == 1) return ts.front();
  return Term::make(Op::And, Sort::Bool, std::move(ts));
}

Term mk_or(std::vector<Term> ts) {
  for (const auto& t : ts) expect(t, Sort::Bool, "or");
  if (ts.empty()) return mk_false();
  if (ts.size() == 1) return ts.front();
  return Term::make(Op::Or, Sort::Bool, std::move(ts));
}

Term mk_implies(Term lhs, Term rhs) {
  expect(lhs, Sort::Bool, "=>");
  expect(rhs, Sort::Bool, "=>");
  return Term::make(Op::Implies, Sort::Bool, {std::move(lhs), std::move(rhs)});
}

Term mk_eq(Term a, Term b) {
  if (a.sort() != b.sort()) throw SortError("== over mismatched sorts: " + to_smt(a) + ", " + to_smt(b));
  return Term::make(Op::Eq, Sort::Bool, {std::move(a), std::move(b)});
}

Term mk_ite(Term c, Term a, Term b) {
  expect(c, Sort::Bool, "ite condition");
  if (a.sort() != b.sort()) throw SortError("ite branches have mismatched sorts");
  Sort s = a.sort();
  return Term::make(Op::Ite, s, {std::move(c), std::move(a), std::move(b)});
}

Term mk_arith(Op op, Term a, Term b) {
  if (op != Op::Add && op != Op::Sub && op != Op::Mul) throw SortError("not an arithmetic operator");
  expect(a, Sort::Int, "arithmetic");
  expect(b, Sort::Int, "arithmetic");
  return Term::make(op, Sort::Int, {std::move(a), std::move(b)});
}

Term mk_neg(Term t) {
  expect(t, Sort::Int, "unary -");
  return Term::make(Op::Neg, Sort::Int, {std::move(t)});
}

Term mk_cmp(Op op, Term a, Term b) {
  if (op != Op::Lt && op != Op::Le && op != Op::Gt && op != Op::Ge)
    throw SortError("not a comparison operator");
  expect(a, Sort::Int, "comparison");
  expect(b, Sort::Int, "comparison");
  return Term::make(op, Sort::Bool, {std::move(a), std::move(b)});
}

Term mk_control_flow(Term arg) {
  expect(arg, Sort::Int, "control-flow function");
  return Term::make(Op::ControlFlow, Sort::Int, {std::move(arg)});
}

Term substitute(const Term& t, const std::map<std::string, Term>& subst) {
  switch (t.op()) {
    case Op::BoolLit:
    case Op::IntLit:
      return t;
    case Op::Var: {
      auto it = subst.find(t.name());
      if (it == subst.end()) return t;
      if (it->second.sort() != t.sort())
        throw SortError("substitution changes sort of " + t.name());
      return it->second;
    }
    default:
      break;
  }
  std::vector<Term> args;
  args.reserve(t.args().size());
  bool changed = false;
  for (const auto& a : t.args()) {
    args.push_back(substitute(a, subst));
    changed = changed || args.back() != a;
  }
  if (!changed) return t;
  switch (t.op()) {
    case Op::Not: return mk_not(args[0]);
    case Op::And: return mk_and(std::move(args));
    case Op::Or: return mk_or(std::move(args));
    case Op::Implies: return mk_implies(args[0], args[1]);
    case Op::Eq: return mk_eq(args[0], args[1]);
    case Op::Ite: return mk_ite(args[0], args[1], args[2]);
    case Op::Add:
    case Op::Sub:
    case Op::Mul: return mk_arith(t.op(), args[0], args[1]);
    case Op::Neg: return mk_neg(args[0]);
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge: return mk_cmp(t.op(), args[0], args[1]);
    case Op::ControlFlow: return mk_control_flow(args[0]);
    default: return t;
  }
}

void collect_vars(const Term& t, std::map<std::string, Sort>& out) {
  if (t.op() == Op::Var) {
    out.emplace(t.name(), t.sort());
    return;
  }
  for (const auto& a : t.args()) collect_vars(a, out);
}

std::string smt_symbol(std::string_view name) {
  static constexpr std::string_view kExtra = "~!@$%^&*_-+=<>.?/";
  bool simple = !name.empty() && !(name[0] >= '0' && name[0] <= '9');
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              kExtra.find(c) != std::string_view::npos;
    if (!ok) {
      simple = false;
      break;
    }
  }
  if (simple) return std::string(name);
  return "|" + std::string(name) + "|";
}

namespace {

std::string_view op_symbol(Op op) {
  switch (op) {
    case Op::Not: return "not";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Implies: return "=>";
    case Op::Eq: return "=";
    case Op::Ite: return "ite";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Neg: return "-";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::ControlFlow: return kControlFlowSymbol;
    default: return "?";
  }
}

void print(std::ostream& os, const Term& t) {
  switch (t.op()) {
    case Op::BoolLit:
      os << (t.bool_value() ? "true" : "false");
      return;
    case Op::IntLit:
      if (t.int_value() < 0)
        os << "(- " << -t.int_value() << ")";
      else
        os << t.int_value();
      return;
    case Op::Var:
      os << smt_symbol(t.name());
      return;
    default:
      break;
  }
  os << '(' << op_symbol(t.op());
  for (const auto& a : t.args()) {
    os << ' ';
    print(os, a);
  }
  os << ')';
}

}  // namespace

std::string to_smt(const Term& t) {
  std::ostringstream os;
  print(os, t);
  return os.str();
}

std::string to_string(const Term& t) { return to_smt(t); }

}  // namespace dbmc
