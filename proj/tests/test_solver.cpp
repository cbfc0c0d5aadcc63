#include <doctest.h>

#include <random>

#include "dbmc/si.hpp"
#include "dbmc/solver.hpp"
#include "support.hpp"

using namespace dbmc;
using namespace std::chrono_literals;

namespace {

Term bv(const std::string& n) { return mk_var(n, Sort::Bool); }
Term iv(const std::string& n) { return mk_var(n, Sort::Int); }

SolverOptions fake(const std::string& mode) {
  SolverOptions o;
  o.command = "sh " + testing::data("fake_solver.sh") + " " + mode;
  o.timeout = 300ms;
  o.grace = 300ms;
  return o;
}

/// Thirteen pigeons in twelve holes.
Term pigeonhole(int holes) {
  std::vector<Term> parts;
  for (int i = 0; i <= holes; ++i) {
    Term p = iv("p" + std::to_string(i));
    parts.push_back(mk_cmp(Op::Ge, p, mk_int(1)));
    parts.push_back(mk_cmp(Op::Le, p, mk_int(holes)));
    for (int j = 0; j < i; ++j) parts.push_back(mk_not(mk_eq(p, iv("p" + std::to_string(j)))));
  }
  return mk_and(parts);
}

}  // namespace

TEST_CASE("empty session is sat") {
  SolverSession s;
  CHECK(s.check().sat());
  CHECK(s.depth() == 0);
  CHECK(s.solver_name() == "Z3");
  CHECK(s.core_minimization());
  CHECK(s.check_count() == 1);
}

TEST_CASE("core minimization can be switched off") {
  SolverOptions o;
  o.minimize_cores = false;
  SolverSession s(o);
  CHECK_FALSE(s.core_minimization());
}

TEST_CASE("bad solver path fails to spawn") {
  SolverOptions o;
  o.command = "/nonexistent/solver -in";
  CHECK_THROWS_AS(SolverSession{o}, SessionFailed);
}

TEST_CASE("push and pop scope assertions and declarations") {
  SolverSession s;
  Term x = bv("x");
  s.push();
  s.assert_named("n", mk_not(x));
  CHECK(s.depth() == 1);
  s.pop();
  s.assert_named("p", x);
  CHECK(s.check().sat());
  CHECK(s.values({x}) == std::vector<std::int64_t>{1});
  CHECK_THROWS_AS(s.pop(), SolverError);
  // a variable first declared inside a popped scope is declared again
  s.push();
  s.assert_named("q", mk_eq(iv("fresh"), mk_int(-4)));
  s.pop();
  s.assert_named("q2", mk_eq(iv("fresh"), mk_int(5)));
  REQUIRE(s.check().sat());
  CHECK(s.values({iv("fresh"), mk_add(iv("fresh"), mk_int(-10))}) == std::vector<std::int64_t>{5, -5});
}

TEST_CASE("assertion names are unique among active assertions") {
  SolverSession s;
  s.assert_named("a", bv("x"));
  CHECK_THROWS_AS(s.assert_named("a", bv("y")), SolverError);
  s.push();
  s.assert_named("b", bv("y"));
  s.pop();
  s.assert_named("b", bv("z"));  // popped names can come back
  CHECK_THROWS_AS(s.assert_named("c", iv("i")), SolverError);
  CHECK(s.has_name("a"));
  CHECK(s.active_names() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("models require a sat check") {
  SolverSession s;
  CHECK_THROWS_AS(s.values({bv("x")}), SolverError);
  s.assert_named("a1", bv("x"));
  s.assert_named("a2", mk_not(bv("x")));
  CHECK(s.check().unsat());
  CHECK_THROWS_AS(s.values({bv("x")}), SolverError);
}

TEST_CASE("unsat cores name asserted constraints") {
  SolverSession s;
  s.assert_named("n0", bv("other"));
  s.assert_named("n1", bv("b"));
  s.assert_named("n2", mk_not(bv("b")));
  CheckResult r = s.check();
  REQUIRE(r.unsat());
  CHECK(r.core == std::set<std::string>{"n1", "n2"});
}

TEST_CASE("reset restores the start-up state") {
  SolverSession s;
  s.push();
  s.assert_named("a", mk_false());
  CHECK(s.check().unsat());
  s.reset();
  CHECK(s.depth() == 0);
  CHECK(s.active_names().empty());
  s.assert_named("a", mk_eq(mk_control_flow(3), iv("y")));
  CHECK(s.check().sat());
  s.reset();
  s.assert_named("a", bv("y"));  // y is now a Bool
  CHECK(s.check().sat());
}

TEST_CASE("exceeded timeout is reported as unknown") {
  SolverOptions o;
  o.timeout = 200ms;
  SolverSession s(o);
  s.assert_named("php", pigeonhole(12));
  CheckResult r = s.check();
  CHECK(r.unknown());
  CHECK(r.reason == "timeout");
  // the session remains usable
  s.reset();
  CHECK(s.check().sat());
}

TEST_CASE("crashing or hanging solvers raise SessionFailed") {
  {
    SolverSession s(fake("crash"));
    CHECK(s.solver_name() == "fake");
    s.assert_named("a", bv("x"));
    CHECK_THROWS_AS(s.check(), SessionFailed);
  }
  {
    SolverSession s(fake("hang"));
    auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(s.check(), SessionFailed);
    CHECK(std::chrono::steady_clock::now() - t0 < 5s);
  }
  {
    SolverSession s(fake("garbage"));
    CHECK_THROWS_AS(s.check(), SessionFailed);
  }
}

TEST_CASE("replaying a decision stack leaves the pre-split constraints") {
  // Mirror a client: baseline, then split/steal sequences of push, assert,
  // pop. After unwinding, every probe query answers as on the baseline.
  std::mt19937_64 rng(11);
  SolverSession s;
  std::vector<Term> vars;
  for (int i = 0; i < 6; ++i) vars.push_back(bv("v" + std::to_string(i)));
  s.assert_named("base", mk_or({vars[0], vars[1], vars[2]}));
  auto probe = [&](std::size_t i, bool positive) {
    s.push();
    s.assert_named("probe", positive ? vars[i] : mk_not(vars[i]));
    auto st = s.check().status;
    s.pop();
    return st;
  };
  std::vector<CheckStatus> baseline;
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (bool pos : {true, false}) baseline.push_back(probe(i, pos));
  int n = 0;
  for (int round = 0; round < 20; ++round) {
    int depth = 0;
    for (int k = 0; k < 4; ++k) {
      s.push();
      ++depth;
      auto i = std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng);
      s.assert_named("d" + std::to_string(n++), std::bernoulli_distribution(0.5)(rng) ? vars[i] : mk_not(vars[i]));
      if (std::bernoulli_distribution(0.3)(rng) && depth > 0) {
        s.pop();
        --depth;
      }
    }
    while (depth-- > 0) s.pop();
    REQUIRE(s.depth() == 0);
    std::vector<CheckStatus> now;
    for (std::size_t i = 0; i < vars.size(); ++i)
      for (bool pos : {true, false}) now.push_back(probe(i, pos));
    CHECK(now == baseline);
  }
}

TEST_CASE("partial VC of foo alone picks one successor") {
  CoreProgram p = testing::load("table1.dbmc");
  SolverSession s;
  SIState st = init_state(p, s);
  const auto c = testing::site("main/L1.foo");
  inline_site(st, c);
  s.assert_named("take", st.ctx.cvar(c));
  REQUIRE(s.check().sat());
  const auto& foo = p.procedure("foo");
  const auto entry = st.ctx.block_id(c, foo.entry);
  auto v = s.values({mk_control_flow(entry)});
  std::set<std::int64_t> succ;
  for (const auto& l : foo.block(foo.entry).successors()) succ.insert(st.ctx.block_id(c, l));
  CHECK(succ.size() == 2);
  CHECK(succ.count(v[0]) == 1);
}

TEST_CASE("s-expression parsing") {
  SExpr e = parse_sexpr("((x 1) (y (- 2)) (|a b| true))");
  REQUIRE(e.is_list);
  CHECK(e.list.size() == 3);
  CHECK(e.list[1].list[1].list[0].atom == "-");
  CHECK(e.list[2].list[0].atom == "a b");
  CHECK(parse_sexpr("\"he said \"\"hi\"\"\" ").atom == "\"he said \"hi\"\"");
  CHECK_THROWS_AS(parse_sexpr("(a b"), SolverError);
  CHECK_THROWS_AS(parse_sexpr(")"), SolverError);
}
