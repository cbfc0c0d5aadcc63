#include <doctest.h>

#include "dbmc/term.hpp"

using namespace dbmc;

TEST_CASE("connectives collapse only trivial arities") {
  Term p = mk_var("p", Sort::Bool);
  Term q = mk_var("q", Sort::Bool);
  CHECK(mk_and({}).is_true());
  CHECK(mk_or({}).is_false());
  CHECK(mk_and({p}) == p);
  CHECK(mk_or({q}) == q);
  Term pq = mk_and({p, q});
  CHECK(pq.op() == Op::And);
  CHECK(pq.args().size() == 2);
  // no flattening or constant folding
  CHECK(mk_and({p, mk_true()}).args().size() == 2);
  CHECK(mk_and({pq, p}).arg(0) == pq);
}

TEST_CASE("sort checking") {
  Term x = mk_var("x", Sort::Int);
  Term p = mk_var("p", Sort::Bool);
  CHECK_THROWS_AS(mk_and({x}), SortError);
  CHECK_THROWS_AS(mk_add(x, p), SortError);
  CHECK_THROWS_AS(mk_eq(x, p), SortError);
  CHECK_THROWS_AS(mk_not(x), SortError);
  CHECK_THROWS_AS(mk_ite(x, x, x), SortError);
  CHECK_THROWS_AS(mk_ite(p, x, p), SortError);
  CHECK_THROWS_AS(mk_control_flow(p), SortError);
  CHECK_THROWS_AS(mk_var("", Sort::Int), SortError);
  CHECK(mk_cmp(Op::Lt, x, mk_int(3)).sort() == Sort::Bool);
  CHECK(mk_control_flow(7).sort() == Sort::Int);
  CHECK(mk_ite(p, x, mk_int(1)).sort() == Sort::Int);
}

TEST_CASE("structural equality") {
  CHECK(mk_add(mk_var("x", Sort::Int), mk_int(1)) == mk_add(mk_var("x", Sort::Int), mk_int(1)));
  CHECK(mk_add(mk_var("x", Sort::Int), mk_int(1)) != mk_add(mk_int(1), mk_var("x", Sort::Int)));
  CHECK(mk_var("x", Sort::Int) != mk_var("x", Sort::Bool));
  CHECK(Term().is_true());
}

TEST_CASE("smt rendering") {
  Term x = mk_var("x", Sort::Int);
  CHECK(to_smt(mk_add(x, mk_int(-3))) == "(+ x (- 3))");
  CHECK(to_smt(mk_control_flow(5)) == "(f 5)");
  CHECK(to_smt(mk_implies(mk_var("b!1!L5", Sort::Bool), mk_true())) == "(=> b!1!L5 true)");
  CHECK(to_smt(mk_var("<entry>", Sort::Bool)) == "<entry>");
  CHECK(smt_symbol("x.0") == "x.0");
  CHECK(smt_symbol("$e.1") == "$e.1");
  CHECK(smt_symbol("a b") == "|a b|");
  CHECK(smt_symbol("9x") == "|9x|");
}

TEST_CASE("substitution and free variables") {
  Term x = mk_var("x", Sort::Int);
  Term y = mk_var("y", Sort::Int);
  Term p = mk_var("p", Sort::Bool);
  Term t = mk_and({p, mk_eq(x, mk_add(y, mk_control_flow(x)))});
  Term s = substitute(t, {{"x", mk_int(4)}, {"p", mk_var("q", Sort::Bool)}});
  CHECK(s == mk_and({mk_var("q", Sort::Bool), mk_eq(mk_int(4), mk_add(y, mk_control_flow(mk_int(4))))}));
  CHECK_THROWS_AS(substitute(t, {{"x", mk_true()}}), SortError);
  std::map<std::string, Sort> vars;
  collect_vars(t, vars);
  CHECK(vars == std::map<std::string, Sort>{{"p", Sort::Bool}, {"x", Sort::Int}, {"y", Sort::Int}});
}
