#include <doctest.h>

#include <functional>
#include <random>
#include <sstream>

#include "dbmc/frontend.hpp"
#include "dbmc/harness.hpp"
#include "support.hpp"

using namespace dbmc;
using surface::Expr;
using surface::Stmt;

namespace {

FrontendError::Kind error_kind(const std::string& src, int depth = 2) {
  try {
    compile(src, depth);
  } catch (const FrontendError& e) {
    return e.kind();
  }
  FAIL("no frontend error for: " << src);
  return FrontendError::Kind::Lowering;
}

std::vector<Term> assumes(const CoreProgram& p, const std::string& proc) {
  std::vector<Term> out;
  for (const auto& b : p.procedure(proc).blocks())
    for (const auto& s : b.statements)
      if (auto a = std::get_if<Assume>(&s)) out.push_back(a->expr);
  return out;
}

bool contains(const std::vector<Term>& ts, const Term& t) { return std::find(ts.begin(), ts.end(), t) != ts.end(); }

Verdict oracle(const CoreProgram& p) {
  SolverSession s;
  return full_inline_oracle(p, s).verdict;
}

Term iv(const std::string& n) { return mk_var(n, Sort::Int); }

}  // namespace

TEST_CASE("parse: passified example listing style") {
  SurfaceProgram sp = parse(R"(
procedure main() {
  var x: int, z: int, b1: bool, b2: bool;
  if (b1) { L1: call foo(x, z); }
  if (b2) { L2: call foo(z, x); }
  if (x > 0) { L3: call foo(x, x); }
  x := 1;
}
procedure foo(x: int, z: int) {
  var d: bool;
  if (d) { assume z == x + 1; } else { assume z == x - 1; }
}
)");
  REQUIRE(sp.procedures.size() == 2);
  CHECK(sp.find("main") != nullptr);
  CHECK(sp.find("foo") != nullptr);
  CHECK(sp.find("bar") == nullptr);
  CHECK(sp.find("main")->body.size() == 4);
  CHECK(sp.find("main")->body[0].body[0].label == std::optional<std::string>("L1"));
}

TEST_CASE("parse: empty main") {
  SurfaceProgram sp = parse("procedure main() { }");
  REQUIRE(sp.procedures.size() == 1);
  CHECK(sp.procedures[0].body.empty());
}

TEST_CASE("frontend errors carry kind and position") {
  using K = FrontendError::Kind;
  CHECK(error_kind("procedure main() { call undeclared(); }") == K::Undefined);
  CHECK(error_kind("procedure main() { var x: int; y := 1; }") == K::Undefined);
  CHECK(error_kind("procedure main() { var x: int; assume q > 1; }") == K::Undefined);
  CHECK(error_kind("procedure foo() { }") == K::Undefined);
  CHECK(error_kind("procedure main() { var x: int; x := true; }") == K::Sort);
  CHECK(error_kind("procedure main() { var x: int; assume x; }") == K::Sort);
  CHECK(error_kind("procedure main() { var x: int, y: int; assume x * y > 0; }") == K::Sort);
  CHECK(error_kind("procedure main(a: int) { }") == K::Sort);
  CHECK(error_kind("procedure main() { } procedure main() { }") == K::Sort);
  CHECK(error_kind("procedure main() { var x: int; call f(x, x); } procedure f(a: int) { }") == K::Sort);
  CHECK(error_kind("procedure main() { call f(); } procedure f() { call main(); }") == K::Sort);
  CHECK(error_kind("procedure main() { var x: int; x := 1 }") == K::Syntax);
  CHECK(error_kind("procedure main() { var x: int; assume 0 < x < 2; }") == K::Syntax);
  CHECK(error_kind("procedure main() { var x: int; x := 1 # 2; }") == K::Syntax);
  CHECK(error_kind("procedure main() { }", 0) == K::Lowering);
  CHECK(error_kind("procedure main() { }", -1) == K::Lowering);

  try {
    parse("procedure main() {\n  var x: int;\n  x := ;\n}");
    FAIL("expected an error");
  } catch (const FrontendError& e) {
    CHECK(e.pos().line == 3);
    CHECK(std::string(e.what()).rfind("3:", 0) == 0);
  }
}

TEST_CASE("lower: assignments are passified") {
  CoreProgram p = compile("procedure main() { var x: int; x := 0; x := x + 1; assert x == 1; }", 2);
  auto as = assumes(p, "main");
  CHECK(contains(as, mk_eq(iv("x.1"), mk_int(0))));
  CHECK(contains(as, mk_eq(iv("x.2"), mk_add(iv("x.1"), mk_int(1)))));
  CHECK(contains(as, mk_not(mk_eq(iv("x.2"), mk_int(1)))));
  for (const auto& v : p.procedure("main").locals) CHECK(v.name != "x");
  CHECK(oracle(p) == Verdict::Safe);
  CHECK(oracle(compile("procedure main() { var x: int; x := 0; x := x + 1; assert x == 2; }", 2)) ==
        Verdict::Unsafe);
}

TEST_CASE("lower: straight-line program without asserts is sealed") {
  CoreProgram p = compile("procedure main() { var x: int; x := 3; assume x > 1; }", 2);
  CHECK(contains(assumes(p, "main"), mk_false()));
  CHECK(oracle(p) == Verdict::Safe);
}

TEST_CASE("lower: loops unroll to the depth and are cut with assume false") {
  CoreProgram p = compile("procedure main() { var x: int; x := 0; while (true) { x := x + 1; } }", 3);
  auto as = assumes(p, "main");
  int increments = 0;
  for (int k = 1; k <= 6; ++k)
    for (int j = 1; j <= 6; ++j)
      if (contains(as, mk_eq(iv("x." + std::to_string(k)), mk_add(iv("x." + std::to_string(j)), mk_int(1)))))
        ++increments;
  CHECK(increments == 3);
  CHECK(std::count(as.begin(), as.end(), mk_false()) >= 2);  // cut and seal
  // exactly three iterations are possible
  const char* src = "procedure main() { var i: int; i := 0; while (i < 10) { i := i + 1; } assert i != %d; }";
  auto with = [&](int n) {
    char buf[200];
    std::snprintf(buf, sizeof buf, src, n);
    return oracle(compile(buf, 3));
  };
  CHECK(with(3) == Verdict::Safe);  // the loop cannot exit after three iterations
  CHECK(compile("procedure main() { var i: int; i := 0; while (i < 3) { i := i + 1; } assert i != 3; }", 3) ==
        compile("procedure main() { var i: int; i := 0; while (i < 3) { i := i + 1; } assert i != 3; }", 3));
  CHECK(oracle(compile("procedure main() { var i: int; i := 0; while (i < 3) { i := i + 1; } assert i != 3; }",
                       3)) == Verdict::Unsafe);
}

TEST_CASE("lower: one call per block and callsites") {
  CoreProgram ex = testing::load("table1.dbmc");
  CHECK(callsites_of(ex.procedure("main")) ==
        std::set<StaticCallsite>{{"L1", "foo"}, {"L2", "bar"}, {"L3", "baz"}});
  CHECK(callsites_of(ex.procedure("foo")).empty());
  CoreProgram two = compile("procedure main() { var x: int; call g(x); call g(x); } procedure g(a: int) { }", 2);
  auto cs = callsites_of(two.procedure("main"));
  CHECK(cs.size() == 2);
  for (const auto& [name, proc] : ex.procedures)
    for (const auto& b : proc.blocks()) {
      int calls = 0;
      for (const auto& s : b.statements) calls += std::holds_alternative<Call>(s);
      CHECK(calls <= 1);
    }
}

TEST_CASE("lower: recursion unrolls to variants") {
  CoreProgram p = compile(R"(
procedure main() { var x: int; call r(x); }
procedure r(n: int) { if (n > 0) { call r(n - 1); } }
)",
                          2);
  CHECK(p.has("r"));
  CHECK(p.has("r$1"));
  CHECK(p.has("r$2"));
  CHECK_FALSE(p.has("r$3"));
  CHECK(callsites_of(p.procedure("r$2")).empty());
}

TEST_CASE("lower: duplicate user labels are renamed") {
  CoreProgram p = compile("procedure main() { var x: int; while (*) { A: call g(x); } } procedure g(a: int) { }", 2);
  auto cs = callsites_of(p.procedure("main"));
  CHECK(cs.size() == 2);
  CHECK(cs.count({"A", "g"}) == 1);
}

TEST_CASE("lower is deterministic and acyclic on the corpus") {
  for (const auto& f : testing::files("corpus", ".dbmc")) {
    std::string src = read_file(f);
    CoreProgram a = compile(src, 2);
    CHECK(a == compile(src, 2));
    for (const auto& [n, proc] : a.procedures) CHECK(proc.topological_order().size() == proc.blocks().size());
  }
}

// ---------------------------------------------------------------------------
// Lowering preserves the surface semantics: a direct interpreter over the
// AST, with every variable confined to {-2..2} by the generated program.
// ---------------------------------------------------------------------------

namespace {

class Interpreter {
 public:
  using Env = std::map<std::string, std::int64_t>;
  using K = std::function<bool(const Env&)>;

  Interpreter(const SurfaceProgram& sp, int depth) : sp_(sp), depth_(depth) {
    std::map<std::string, std::set<std::string>> edges;
    std::function<void(const std::vector<Stmt>&, std::set<std::string>&)> scan = [&](const auto& ss, auto& out) {
      for (const auto& s : ss) {
        if (s.kind == Stmt::Kind::Call) out.insert(s.name);
        scan(s.body, out);
        scan(s.else_body, out);
      }
    };
    for (const auto& p : sp.procedures) scan(p.body, edges[p.name]);
    for (const auto& p : sp.procedures) {
      std::vector<std::string> work(edges[p.name].begin(), edges[p.name].end());
      while (!work.empty()) {
        auto n = work.back();
        work.pop_back();
        if (reach_[p.name].insert(n).second)
          for (const auto& m : edges[n]) work.push_back(m);
      }
    }
  }

  /// True when some execution fails an assertion.
  bool can_fail() {
    return enter(*sp_.find("main"), {}, 0, [](const Env&) { return false; });
  }

 private:
  struct Frame {
    const surface::ProcDecl* decl;
    int level;
  };

  bool enter(const surface::ProcDecl& d, Env env, int level, const K& k) {
    return havoc(d, 0, env, level, k);
  }

  bool havoc(const surface::ProcDecl& d, std::size_t i, Env& env, int level, const K& k) {
    if (i == d.locals.size()) return exec(d.body, 0, env, {&d, level}, k);
    const auto& v = d.locals[i];
    const int lo = v.sort == Sort::Bool ? 0 : -2, hi = v.sort == Sort::Bool ? 1 : 2;
    for (int x = lo; x <= hi; ++x) {
      env[v.name] = x;
      if (havoc(d, i + 1, env, level, k)) return true;
    }
    return false;
  }

  std::int64_t eval(const surface::ExprPtr& e, const Env& env) const {
    switch (e->kind) {
      case Expr::Kind::IntLit:
      case Expr::Kind::BoolLit: return e->value;
      case Expr::Kind::Var: return env.at(e->name);
      case Expr::Kind::Unary: return e->name == "!" ? !eval(e->args[0], env) : -eval(e->args[0], env);
      case Expr::Kind::Ite: return eval(e->args[0], env) ? eval(e->args[1], env) : eval(e->args[2], env);
      case Expr::Kind::Binary: break;
    }
    const auto a = eval(e->args[0], env), b = eval(e->args[1], env);
    const std::string& op = e->name;
    if (op == "+") return a + b;
    if (op == "-") return a - b;
    if (op == "*") return a * b;
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "&&") return a && b;
    if (op == "||") return a || b;
    throw std::logic_error("operator " + op);
  }

  bool exec(const std::vector<Stmt>& ss, std::size_t i, Env env, Frame fr, const K& k) {
    if (i == ss.size()) return k(env);
    const Stmt& s = ss[i];
    K next = [&, fr](const Env& e) { return exec(ss, i + 1, e, fr, k); };
    switch (s.kind) {
      case Stmt::Kind::Assign: env[s.name] = eval(s.expr, env); return next(env);
      case Stmt::Kind::Assume: return eval(s.expr, env) ? next(env) : false;
      case Stmt::Kind::Assert: return eval(s.expr, env) ? next(env) : true;
      case Stmt::Kind::Block: return exec(s.body, 0, env, fr, next);
      case Stmt::Kind::If:
        if (!s.expr) return exec(s.body, 0, env, fr, next) || exec(s.else_body, 0, env, fr, next);
        return eval(s.expr, env) ? exec(s.body, 0, env, fr, next) : exec(s.else_body, 0, env, fr, next);
      case Stmt::Kind::While: return loop(s, 0, env, fr, next);
      case Stmt::Kind::Call: {
        const auto& callee = *sp_.find(s.name);
        int level = 0;
        if (reach_[fr.decl->name].count(s.name) && reach_[s.name].count(fr.decl->name)) {
          level = fr.level + 1;
          if (level > depth_) return false;
        }
        Env inner;
        for (std::size_t j = 0; j < callee.formals.size(); ++j) inner[callee.formals[j].name] = eval(s.args[j], env);
        return enter(callee, inner, level, [&](const Env&) { return next(env); });
      }
    }
    return false;
  }

  bool loop(const Stmt& s, int iter, const Env& env, Frame fr, const K& after) {
    auto body = [&]() {
      if (iter == depth_) return false;
      return exec(s.body, 0, env, fr, [&, fr](const Env& e) { return loop(s, iter + 1, e, fr, after); });
    };
    if (!s.expr) return after(env) || body();
    return eval(s.expr, env) ? body() : after(env);
  }

  const SurfaceProgram& sp_;
  int depth_;
  std::map<std::string, std::set<std::string>> reach_;
};

class RandomProgram {
 public:
  explicit RandomProgram(std::uint64_t seed) : rng_(seed) {}

  std::string make() {
    std::ostringstream os;
    nprocs_ = pick(1, 3);
    for (int p = 0; p <= nprocs_; ++p) {
      vars_ = p == 0 ? std::vector<std::string>{"x", "y"} : std::vector<std::string>{"a", "b", "t"};
      bools_ = {"c"};
      if (p == 0) {
        os << "procedure main() {\n  var x: int, y: int, c: bool;\n";
        os << "  assume -2 <= x && x <= 2 && -2 <= y && y <= 2;\n";
      } else {
        os << "procedure p" << p << "(a: int, b: int) {\n  var t: int, c: bool;\n";
        os << "  assume -2 <= t && t <= 2;\n";
      }
      self_ = p;
      for (int n = pick(1, 4); n > 0; --n) stmt(os, 1, 2);
      os << "}\n";
    }
    return os.str();
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  const std::string& any(const std::vector<std::string>& v) { return v[pick(0, int(v.size()) - 1)]; }

  std::string atom() { return coin(0.6) ? any(vars_) : std::to_string(pick(-2, 2)); }
  std::string int_expr(int d) {
    if (d == 0 || coin(0.4)) return atom();
    switch (pick(0, 3)) {
      case 0: return "(" + int_expr(d - 1) + " + " + int_expr(d - 1) + ")";
      case 1: return "(" + int_expr(d - 1) + " - " + int_expr(d - 1) + ")";
      case 2: return "(" + std::to_string(pick(-2, 2)) + " * " + int_expr(d - 1) + ")";
      default: return "ite(" + bool_expr(d - 1) + ", " + int_expr(d - 1) + ", " + int_expr(d - 1) + ")";
    }
  }
  std::string bool_expr(int d) {
    static const char* cmp[] = {"==", "!=", "<", "<=", ">", ">="};
    if (d == 0 || coin(0.5)) {
      if (coin(0.15)) return any(bools_);
      return int_expr(1) + " " + cmp[pick(0, 5)] + " " + int_expr(1);
    }
    switch (pick(0, 2)) {
      case 0: return "(" + bool_expr(d - 1) + " && " + bool_expr(d - 1) + ")";
      case 1: return "(" + bool_expr(d - 1) + " || " + bool_expr(d - 1) + ")";
      default: return "!(" + bool_expr(d - 1) + ")";
    }
  }
  void stmt(std::ostringstream& os, int indent, int d) {
    std::string pad(2 * indent, ' ');
    int kind = pick(0, 9);
    if (d == 0 && kind >= 6) kind = 0;
    switch (kind) {
      case 0:
      case 1: os << pad << any(vars_) << " := " << int_expr(2) << ";\n"; return;
      case 2: os << pad << "c := " << bool_expr(1) << ";\n"; return;
      case 3: os << pad << "assume " << bool_expr(1) << ";\n"; return;
      case 4:
      case 5: os << pad << "assert " << bool_expr(2) << ";\n"; return;
      case 6:
      case 7:
        os << pad << "if (" << (coin(0.3) ? "*" : bool_expr(1)) << ") {\n";
        for (int n = pick(1, 2); n > 0; --n) stmt(os, indent + 1, d - 1);
        os << pad << "} else {\n";
        if (coin(0.5)) stmt(os, indent + 1, d - 1);
        os << pad << "}\n";
        return;
      case 8:
        os << pad << "while (" << (coin(0.3) ? "*" : bool_expr(1)) << ") {\n";
        stmt(os, indent + 1, d - 1);
        os << pad << "}\n";
        return;
      default: {
        int callee = pick(1, nprocs_);
        os << pad << "call p" << callee << "(" << int_expr(1) << ", " << int_expr(1) << ");\n";
        return;
      }
    }
  }

  std::mt19937_64 rng_;
  int nprocs_ = 1;
  int self_ = 0;
  std::vector<std::string> vars_, bools_;
};

}  // namespace

TEST_CASE("lowering agrees with the surface interpreter on bounded inputs") {
  SolverSession session;
  int unsafe = 0, programs = 0;
  for (std::uint64_t seed = 1; programs < 60; ++seed) {
    std::string src = RandomProgram(seed).make();
    SurfaceProgram sp = parse(src);
    for (int depth : {1, 2}) {
      bool fails = Interpreter(sp, depth).can_fail();
      CoreProgram p = lower(sp, depth);
      SIResult r = full_inline_oracle(p, session);
      INFO("seed " << seed << " depth " << depth << "\n" << src);
      REQUIRE(r.verdict != Verdict::Inconclusive);
      CHECK((r.verdict == Verdict::Unsafe) == fails);
      unsafe += fails;
    }
    ++programs;
  }
  // the sample exercises both verdicts
  CHECK(unsafe > 10);
  CHECK(unsafe < 110);
}
