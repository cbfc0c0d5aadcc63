#include "dbmc/frontend.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace dbmc {

namespace {

std::string kind_name(FrontendError::Kind k) {
  switch (k) {
    case FrontendError::Kind::Syntax: return "syntax error";
    case FrontendError::Kind::Sort: return "sort error";
    case FrontendError::Kind::Undefined: return "undefined name";
    case FrontendError::Kind::Lowering: return "lowering error";
  }
  return "error";
}

}  // namespace

FrontendError::FrontendError(Kind kind, SourcePos pos, const std::string& msg)
    : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " +
                         kind_name(kind) + ": " + msg),
      kind_(kind),
      pos_(pos) {}

const surface::ProcDecl* surface::SurfaceProgram::find(std::string_view name) const {
  for (const auto& p : procedures)
    if (p.name == name) return &p;
  return nullptr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

using surface::Expr;
using surface::ExprPtr;
using surface::ProcDecl;
using surface::Stmt;

enum class Tok { Ident, Int, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      SourcePos p = pos_;
      if (i_ >= src_.size()) {
        out.push_back({Tok::End, "", p});
        return out;
      }
      char c = src_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t b = i_;
        while (i_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
          advance();
        out.push_back({Tok::Ident, std::string(src_.substr(b, i_ - b)), p});
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t b = i_;
        while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
        out.push_back({Tok::Int, std::string(src_.substr(b, i_ - b)), p});
      } else {
        static const char* kTwo[] = {":=", "==", "!=", "<=", ">=", "&&", "||"};
        std::string text;
        for (const char* t : kTwo)
          if (src_.substr(i_, 2) == t) text = t;
        if (text.empty()) {
          static constexpr std::string_view kOne = "(){},;:+-*<>!";
          if (kOne.find(c) == std::string_view::npos)
            throw FrontendError(FrontendError::Kind::Syntax, p, std::string("unexpected character '") + c + "'");
          text = std::string(1, c);
        }
        for (std::size_t k = 0; k < text.size(); ++k) advance();
        out.push_back({Tok::Punct, text, p});
      }
    }
  }

 private:
  void advance() {
    if (src_[i_] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++i_;
  }

  void skip_space() {
    while (i_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[i_]))) {
        advance();
      } else if (src_.substr(i_, 2) == "//") {
        while (i_ < src_.size() && src_[i_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  SourcePos pos_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

const std::set<std::string>& keywords() {
  static const std::set<std::string> k = {"procedure", "var",  "int",  "bool", "assume", "assert",
                                          "call",      "if",   "else", "while", "true",  "false",
                                          "ite"};
  return k;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  surface::SurfaceProgram program() {
    surface::SurfaceProgram sp;
    while (peek().kind != Tok::End) sp.procedures.push_back(procedure());
    return sp;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  bool is(std::string_view text, std::size_t k = 0) const {
    const Token& t = peek(k);
    return (t.kind == Tok::Punct || t.kind == Tok::Ident) && t.text == text;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FrontendError(FrontendError::Kind::Syntax, peek().pos, msg);
  }
  Token take() { return toks_[std::min(i_++, toks_.size() - 1)]; }
  void expect(std::string_view text) {
    if (!is(text)) fail("expected '" + std::string(text) + "' but found '" + describe(peek()) + "'");
    take();
  }
  static std::string describe(const Token& t) { return t.kind == Tok::End ? "end of input" : t.text; }
  std::string ident(std::string_view what) {
    const Token& t = peek();
    if (t.kind != Tok::Ident || keywords().count(t.text))
      fail("expected " + std::string(what) + " but found '" + describe(t) + "'");
    return take().text;
  }

  Sort type() {
    if (is("int")) {
      take();
      return Sort::Int;
    }
    if (is("bool")) {
      take();
      return Sort::Bool;
    }
    fail("expected a type (int or bool)");
  }

  ProcDecl procedure() {
    ProcDecl p;
    p.pos = peek().pos;
    expect("procedure");
    p.name = ident("procedure name");
    expect("(");
    if (!is(")")) {
      for (;;) {
        TypedVar v;
        v.name = ident("parameter name");
        expect(":");
        v.sort = type();
        p.formals.push_back(v);
        if (!is(",")) break;
        take();
      }
    }
    expect(")");
    expect("{");
    while (!is("}")) {
      if (peek().kind == Tok::End) fail("unterminated procedure body");
      if (is("var")) {
        take();
        for (;;) {
          TypedVar v;
          v.name = ident("variable name");
          expect(":");
          v.sort = type();
          p.locals.push_back(v);
          if (!is(",")) break;
          take();
        }
        expect(";");
        continue;
      }
      p.body.push_back(statement());
    }
    expect("}");
    return p;
  }

  std::vector<Stmt> block() {
    std::vector<Stmt> out;
    expect("{");
    while (!is("}")) {
      if (peek().kind == Tok::End) fail("unterminated block");
      if (is("var")) fail("variable declarations are only allowed at procedure level");
      out.push_back(statement());
    }
    expect("}");
    return out;
  }

  ExprPtr condition() {
    expect("(");
    ExprPtr c;
    if (is("*") && is(")", 1)) {
      take();
    } else {
      c = expr();
    }
    expect(")");
    return c;
  }

  Stmt statement() {
    std::optional<std::string> label;
    if (peek().kind == Tok::Ident && !keywords().count(peek().text) && is(":", 1)) {
      label = take().text;
      take();
    }
    Stmt s;
    s.pos = peek().pos;
    s.label = label;
    if (is("assume") || is("assert")) {
      s.kind = is("assume") ? Stmt::Kind::Assume : Stmt::Kind::Assert;
      take();
      s.expr = expr();
      expect(";");
    } else if (is("call")) {
      take();
      s.kind = Stmt::Kind::Call;
      s.name = ident("procedure name");
      expect("(");
      if (!is(")")) {
        for (;;) {
          s.args.push_back(expr());
          if (!is(",")) break;
          take();
        }
      }
      expect(")");
      expect(";");
    } else if (is("if")) {
      take();
      s.kind = Stmt::Kind::If;
      s.expr = condition();
      s.body = block();
      if (is("else")) {
        take();
        if (is("if"))
          s.else_body.push_back(statement());
        else
          s.else_body = block();
      }
    } else if (is("while")) {
      take();
      s.kind = Stmt::Kind::While;
      s.expr = condition();
      s.body = block();
    } else if (is("{")) {
      s.kind = Stmt::Kind::Block;
      s.body = block();
    } else if (peek().kind == Tok::Ident && !keywords().count(peek().text) && is(":=", 1)) {
      s.kind = Stmt::Kind::Assign;
      s.name = take().text;
      take();
      s.expr = expr();
      expect(";");
    } else {
      fail("expected a statement but found '" + describe(peek()) + "'");
    }
    return s;
  }

  ExprPtr make(Expr::Kind k, SourcePos pos, std::string name, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->pos = pos;
    e->name = std::move(name);
    e->args = std::move(args);
    return e;
  }

  ExprPtr binary_level(int level) {
    static const std::vector<std::vector<std::string>> kLevels = {
        {"||"}, {"&&"}, {"==", "!="}, {"<", "<=", ">", ">="}, {"+", "-"}, {"*"}};
    if (level == static_cast<int>(kLevels.size())) return unary();
    ExprPtr lhs = binary_level(level + 1);
    for (;;) {
      const auto& ops = kLevels[level];
      const Token& t = peek();
      bool match = t.kind == Tok::Punct && std::find(ops.begin(), ops.end(), t.text) != ops.end();
      if (!match) return lhs;
      Token op = take();
      ExprPtr rhs = binary_level(level + 1);
      // Comparisons do not chain.
      if (level == 2 || level == 3) {
        lhs = make(Expr::Kind::Binary, op.pos, op.text, {lhs, rhs});
        const Token& n = peek();
        if (n.kind == Tok::Punct && std::find(ops.begin(), ops.end(), n.text) != ops.end())
          fail("comparison operators do not associate; add parentheses");
        return lhs;
      }
      lhs = make(Expr::Kind::Binary, op.pos, op.text, {lhs, rhs});
    }
  }

  ExprPtr expr() { return binary_level(0); }

  ExprPtr unary() {
    if (is("!") || is("-")) {
      Token op = take();
      return make(Expr::Kind::Unary, op.pos, op.text, {unary()});
    }
    return primary();
  }

  ExprPtr primary() {
    const Token& t = peek();
    SourcePos pos = t.pos;
    if (t.kind == Tok::Int) {
      auto e = make(Expr::Kind::IntLit, pos, "", {});
      std::string text = take().text;
      try {
        std::const_pointer_cast<Expr>(e)->value = std::stoll(text);
      } catch (const std::out_of_range&) {
        throw FrontendError(FrontendError::Kind::Syntax, pos, "integer literal out of range");
      }
      return e;
    }
    if (is("true") || is("false")) {
      auto e = make(Expr::Kind::BoolLit, pos, "", {});
      std::const_pointer_cast<Expr>(e)->value = take().text == "true";
      return e;
    }
    if (is("ite")) {
      take();
      expect("(");
      ExprPtr c = expr();
      expect(",");
      ExprPtr a = expr();
      expect(",");
      ExprPtr b = expr();
      expect(")");
      return make(Expr::Kind::Ite, pos, "ite", {c, a, b});
    }
    if (is("(")) {
      take();
      ExprPtr e = expr();
      expect(")");
      return e;
    }
    if (t.kind == Tok::Ident && !keywords().count(t.text)) return make(Expr::Kind::Var, pos, take().text, {});
    fail("expected an expression but found '" + describe(t) + "'");
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

// ---------------------------------------------------------------------------
// Declaration and sort checking
// ---------------------------------------------------------------------------

class Checker {
 public:
  explicit Checker(surface::SurfaceProgram& sp) : sp_(sp) {}

  void run() {
    std::set<std::string> names;
    for (const auto& p : sp_.procedures)
      if (!names.insert(p.name).second)
        throw FrontendError(FrontendError::Kind::Sort, p.pos, "duplicate procedure " + p.name);
    const ProcDecl* main = sp_.find("main");
    if (!main) throw FrontendError(FrontendError::Kind::Undefined, {1, 1}, "no procedure main");
    if (!main->formals.empty())
      throw FrontendError(FrontendError::Kind::Sort, main->pos, "main must not take parameters");
    for (auto& p : sp_.procedures) check(p);
  }

 private:
  void check(ProcDecl& p) {
    vars_.clear();
    for (const auto& v : p.formals)
      if (!vars_.emplace(v.name, v.sort).second)
        throw FrontendError(FrontendError::Kind::Sort, p.pos, "duplicate parameter " + v.name);
    for (const auto& v : p.locals)
      if (!vars_.emplace(v.name, v.sort).second)
        throw FrontendError(FrontendError::Kind::Sort, p.pos, "duplicate variable " + v.name);
    for (auto& s : p.body) stmt(s);
  }

  void stmt(Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Assign: {
        auto it = vars_.find(s.name);
        if (it == vars_.end())
          throw FrontendError(FrontendError::Kind::Undefined, s.pos, "undeclared variable " + s.name);
        expect(s.expr, it->second, "assignment to " + s.name);
        break;
      }
      case Stmt::Kind::Assume:
      case Stmt::Kind::Assert:
        expect(s.expr, Sort::Bool, "condition");
        break;
      case Stmt::Kind::If:
      case Stmt::Kind::While:
        if (s.expr) expect(s.expr, Sort::Bool, "condition");
        for (auto& b : s.body) stmt(b);
        for (auto& b : s.else_body) stmt(b);
        break;
      case Stmt::Kind::Block:
        for (auto& b : s.body) stmt(b);
        break;
      case Stmt::Kind::Call: {
        const ProcDecl* callee = sp_.find(s.name);
        if (!callee) throw FrontendError(FrontendError::Kind::Undefined, s.pos, "undeclared procedure " + s.name);
        if (s.name == "main") throw FrontendError(FrontendError::Kind::Sort, s.pos, "main cannot be called");
        if (callee->formals.size() != s.args.size())
          throw FrontendError(FrontendError::Kind::Sort, s.pos,
                              "call to " + s.name + " expects " + std::to_string(callee->formals.size()) +
                                  " arguments, got " + std::to_string(s.args.size()));
        for (std::size_t i = 0; i < s.args.size(); ++i)
          expect(s.args[i], callee->formals[i].sort, "argument " + std::to_string(i + 1) + " of " + s.name);
        break;
      }
    }
  }

  void expect(const ExprPtr& e, Sort want, const std::string& what) {
    Sort got = sort(e);
    if (got != want)
      throw FrontendError(FrontendError::Kind::Sort, e->pos,
                          what + " must be " + std::string(sort_name(want)) + ", got " +
                              std::string(sort_name(got)));
  }

  static bool is_literal(const ExprPtr& e) {
    if (e->kind == Expr::Kind::IntLit) return true;
    return e->kind == Expr::Kind::Unary && e->name == "-" && is_literal(e->args[0]);
  }

  Sort sort(const ExprPtr& e) {
    auto& m = const_cast<Expr&>(*e);
    switch (e->kind) {
      case Expr::Kind::IntLit: m.sort = Sort::Int; break;
      case Expr::Kind::BoolLit: m.sort = Sort::Bool; break;
      case Expr::Kind::Var: {
        auto it = vars_.find(e->name);
        if (it == vars_.end())
          throw FrontendError(FrontendError::Kind::Undefined, e->pos, "undeclared variable " + e->name);
        m.sort = it->second;
        break;
      }
      case Expr::Kind::Unary:
        if (e->name == "!") {
          expect(e->args[0], Sort::Bool, "operand of !");
          m.sort = Sort::Bool;
        } else {
          expect(e->args[0], Sort::Int, "operand of unary -");
          m.sort = Sort::Int;
        }
        break;
      case Expr::Kind::Ite: {
        expect(e->args[0], Sort::Bool, "ite condition");
        Sort a = sort(e->args[1]);
        expect(e->args[2], a, "ite else-branch");
        m.sort = a;
        break;
      }
      case Expr::Kind::Binary: {
        const std::string& op = e->name;
        if (op == "&&" || op == "||") {
          expect(e->args[0], Sort::Bool, "operand of " + op);
          expect(e->args[1], Sort::Bool, "operand of " + op);
          m.sort = Sort::Bool;
        } else if (op == "==" || op == "!=") {
          Sort a = sort(e->args[0]);
          expect(e->args[1], a, "operand of " + op);
          m.sort = Sort::Bool;
        } else if (op == "<" || op == "<=" || op == ">" || op == ">=") {
          expect(e->args[0], Sort::Int, "operand of " + op);
          expect(e->args[1], Sort::Int, "operand of " + op);
          m.sort = Sort::Bool;
        } else {
          expect(e->args[0], Sort::Int, "operand of " + op);
          expect(e->args[1], Sort::Int, "operand of " + op);
          if (op == "*" && !is_literal(e->args[0]) && !is_literal(e->args[1]))
            throw FrontendError(FrontendError::Kind::Sort, e->pos,
                                "nonlinear multiplication: one operand of * must be a literal");
          m.sort = Sort::Int;
        }
        break;
      }
    }
    return e->sort;
  }

  surface::SurfaceProgram& sp_;
  std::map<std::string, Sort> vars_;
};

}  // namespace

SurfaceProgram parse(std::string_view text) {
  Parser parser(Lexer(text).run());
  SurfaceProgram sp = parser.program();
  Checker(sp).run();
  return sp;
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

namespace {

class Lowerer;

class ProcLowering {
 public:
  ProcLowering(Lowerer& owner, const ProcDecl& decl, std::string name, int level);
  Procedure run();

 private:
  std::string gen_label() {
    std::string l;
    do {
      l = "$" + std::to_string(next_label_++);
    } while (used_.count(l));
    used_.insert(l);
    return l;
  }

  std::string user_label(const std::string& name) {
    std::string l = name;
    int k = 1;
    while (used_.count(l)) l = name + "$" + std::to_string(++k);
    used_.insert(l);
    return l;
  }

  void start(const std::string& label) {
    Block b;
    b.label = label;
    proc_.add_block(std::move(b));
    cur_ = label;
  }

  void emit(Statement s) { proc_.mutable_block(cur_).statements.push_back(std::move(s)); }
  void terminate(const std::string& label, std::vector<std::string> targets) {
    proc_.mutable_block(label).terminator = Goto{std::move(targets)};
  }

  Term fresh_version(const std::string& var, Sort sort) {
    int& v = version_[var];
    ++v;
    std::string n = var + "." + std::to_string(v);
    proc_.locals.push_back({n, sort});
    return mk_var(n, sort);
  }

  Term expr(const ExprPtr& e) const;
  void stmts(const std::vector<Stmt>& ss);
  void stmt(const Stmt& s);
  void branch(const Term* cond, const std::vector<Stmt>& then_body, const std::vector<Stmt>& else_body);
  void loop(const Stmt& s, int remaining);
  void call(const Stmt& s);
  void fail_exit(const std::string& from);

  Lowerer& owner_;
  const ProcDecl& decl_;
  int level_;
  Procedure proc_;
  std::map<std::string, Term> env_;
  std::map<std::string, int> version_;
  std::set<std::string> used_;
  int next_label_ = 0;
  std::string cur_;
  std::string exit_;
  bool is_main_;
  bool may_fail_;
  int err_versions_ = 0;
};

class Lowerer {
 public:
  Lowerer(const SurfaceProgram& sp, int depth) : sp_(sp), depth_(depth) {
    analyze();
  }

  CoreProgram run() {
    lower_proc("main", 0);
    return std::move(out_);
  }

  int depth() const { return depth_; }
  bool may_fail(const std::string& p) const { return may_fail_.count(p) != 0; }
  bool same_scc(const std::string& a, const std::string& b) const {
    return reach_.at(a).count(b) && reach_.at(b).count(a);
  }
  const ProcDecl& decl(const std::string& n) const { return *sp_.find(n); }

  std::string lower_proc(const std::string& name, int level) {
    std::string variant = level == 0 ? name : name + "$" + std::to_string(level);
    if (out_.procedures.count(variant)) return variant;
    Procedure p = ProcLowering(*this, decl(name), variant, level).run();
    out_.procedures.emplace(variant, std::move(p));
    return variant;
  }

 private:
  static void calls_in(const std::vector<Stmt>& ss, std::set<std::string>& out, bool& asserts) {
    for (const auto& s : ss) {
      if (s.kind == Stmt::Kind::Call) out.insert(s.name);
      if (s.kind == Stmt::Kind::Assert) asserts = true;
      calls_in(s.body, out, asserts);
      calls_in(s.else_body, out, asserts);
    }
  }

  void analyze() {
    std::map<std::string, std::set<std::string>> edges;
    std::set<std::string> fails;
    for (const auto& p : sp_.procedures) {
      bool asserts = false;
      calls_in(p.body, edges[p.name], asserts);
      if (asserts) fails.insert(p.name);
    }
    // Transitive closure of the call graph.
    for (const auto& p : sp_.procedures) {
      auto& r = reach_[p.name];
      std::vector<std::string> work(edges[p.name].begin(), edges[p.name].end());
      while (!work.empty()) {
        std::string n = work.back();
        work.pop_back();
        if (!r.insert(n).second) continue;
        for (const auto& m : edges[n]) work.push_back(m);
      }
    }
    for (const auto& p : sp_.procedures) {
      bool f = fails.count(p.name) != 0;
      for (const auto& q : reach_[p.name]) f = f || fails.count(q);
      if (f) may_fail_.insert(p.name);
    }
  }

  const SurfaceProgram& sp_;
  int depth_;
  std::map<std::string, std::set<std::string>> reach_;
  std::set<std::string> may_fail_;
  CoreProgram out_;
};

ProcLowering::ProcLowering(Lowerer& owner, const ProcDecl& decl, std::string name, int level)
    : owner_(owner), decl_(decl), level_(level), is_main_(decl.name == "main") {
  proc_.name = std::move(name);
  may_fail_ = owner.may_fail(decl.name);
}

Procedure ProcLowering::run() {
  for (const auto& f : decl_.formals) {
    proc_.formals.push_back(f);
    env_[f.name] = mk_var(f.name, f.sort);
  }
  if (may_fail_ && !is_main_) proc_.formals.push_back({std::string(kErrorFormal), Sort::Bool});
  for (const auto& v : decl_.locals) {
    std::string n = v.name + ".0";
    proc_.locals.push_back({n, v.sort});
    env_[v.name] = mk_var(n, v.sort);
  }
  proc_.entry = gen_label();
  if (is_main_ || may_fail_) exit_ = gen_label();
  start(proc_.entry);
  stmts(decl_.body);
  if (is_main_) {
    // Passing every assertion must not reach main's return.
    emit(Assume{mk_false()});
    terminate(cur_, {exit_});
  } else if (may_fail_) {
    emit(Assume{mk_not(mk_var(std::string(kErrorFormal), Sort::Bool))});
    terminate(cur_, {exit_});
  }
  if (!exit_.empty()) start(exit_);
  // The last opened block ends in return.
  proc_.mutable_block(cur_).terminator = Return{};
  return std::move(proc_);
}

Term ProcLowering::expr(const ExprPtr& e) const {
  switch (e->kind) {
    case Expr::Kind::IntLit: return mk_int(e->value);
    case Expr::Kind::BoolLit: return mk_bool(e->value != 0);
    case Expr::Kind::Var: return env_.at(e->name);
    case Expr::Kind::Unary:
      return e->name == "!" ? mk_not(expr(e->args[0])) : mk_neg(expr(e->args[0]));
    case Expr::Kind::Ite: return mk_ite(expr(e->args[0]), expr(e->args[1]), expr(e->args[2]));
    case Expr::Kind::Binary: {
      Term a = expr(e->args[0]);
      Term b = expr(e->args[1]);
      const std::string& op = e->name;
      if (op == "&&") return mk_and({a, b});
      if (op == "||") return mk_or({a, b});
      if (op == "==") return mk_eq(a, b);
      if (op == "!=") return mk_not(mk_eq(a, b));
      if (op == "<") return mk_cmp(Op::Lt, a, b);
      if (op == "<=") return mk_cmp(Op::Le, a, b);
      if (op == ">") return mk_cmp(Op::Gt, a, b);
      if (op == ">=") return mk_cmp(Op::Ge, a, b);
      if (op == "+") return mk_add(a, b);
      if (op == "-") return mk_sub(a, b);
      if (op == "*") return mk_mul(a, b);
      break;
    }
  }
  throw FrontendError(FrontendError::Kind::Lowering, e->pos, "unsupported expression");
}

void ProcLowering::stmts(const std::vector<Stmt>& ss) {
  for (const auto& s : ss) stmt(s);
}

void ProcLowering::fail_exit(const std::string& from) {
  if (!is_main_)
    proc_.mutable_block(from).statements.push_back(Assume{mk_var(std::string(kErrorFormal), Sort::Bool)});
  terminate(from, {exit_});
}

void ProcLowering::stmt(const Stmt& s) {
  if (s.label) {
    std::string l = user_label(*s.label);
    terminate(cur_, {l});
    start(l);
  }
  switch (s.kind) {
    case Stmt::Kind::Assign: {
      Term rhs = expr(s.expr);
      Term v = fresh_version(s.name, rhs.sort());
      emit(Assume{mk_eq(v, rhs)});
      env_[s.name] = v;
      break;
    }
    case Stmt::Kind::Assume:
      emit(Assume{expr(s.expr)});
      break;
    case Stmt::Kind::Assert: {
      Term e = expr(s.expr);
      std::string fail = gen_label();
      std::string cont = gen_label();
      terminate(cur_, {fail, cont});
      start(fail);
      emit(Assume{mk_not(e)});
      fail_exit(fail);
      start(cont);
      emit(Assume{e});
      break;
    }
    case Stmt::Kind::If: {
      if (s.expr) {
        Term c = expr(s.expr);
        branch(&c, s.body, s.else_body);
      } else {
        branch(nullptr, s.body, s.else_body);
      }
      break;
    }
    case Stmt::Kind::While:
      loop(s, owner_.depth());
      break;
    case Stmt::Kind::Block:
      stmts(s.body);
      break;
    case Stmt::Kind::Call:
      call(s);
      break;
  }
}

void ProcLowering::branch(const Term* cond, const std::vector<Stmt>& then_body,
                          const std::vector<Stmt>& else_body) {
  std::string t = gen_label();
  std::string e = gen_label();
  terminate(cur_, {t, e});
  const auto before = env_;

  start(t);
  if (cond) emit(Assume{*cond});
  stmts(then_body);
  std::string t_end = cur_;
  auto env_t = env_;

  env_ = before;
  start(e);
  if (cond) emit(Assume{mk_not(*cond)});
  stmts(else_body);
  std::string e_end = cur_;
  auto env_e = env_;

  // Join: reconcile variable versions that differ between the branches.
  std::string j = gen_label();
  for (auto& [var, term_t] : env_t) {
    const Term& term_e = env_e.at(var);
    if (term_t == term_e) continue;
    Term v = fresh_version(var, term_t.sort());
    proc_.mutable_block(t_end).statements.push_back(Assume{mk_eq(v, term_t)});
    proc_.mutable_block(e_end).statements.push_back(Assume{mk_eq(v, term_e)});
    env_e[var] = v;
  }
  env_ = env_e;
  terminate(t_end, {j});
  terminate(e_end, {j});
  start(j);
}

void ProcLowering::loop(const Stmt& s, int remaining) {
  Term c = s.expr ? expr(s.expr) : mk_true();
  const Term* cond = s.expr ? &c : nullptr;
  if (remaining == 0) {
    // Iterations beyond the bound are cut off.
    std::vector<Stmt> cut(1);
    cut[0].kind = Stmt::Kind::Assume;
    cut[0].pos = s.pos;
    auto f = std::make_shared<Expr>();
    f->kind = Expr::Kind::BoolLit;
    f->sort = Sort::Bool;
    f->value = 0;
    cut[0].expr = f;
    branch(cond, cut, {});
    return;
  }
  std::string t = gen_label();
  std::string e = gen_label();
  terminate(cur_, {t, e});
  const auto before = env_;

  start(t);
  if (cond) emit(Assume{*cond});
  stmts(s.body);
  loop(s, remaining - 1);
  std::string t_end = cur_;
  auto env_t = env_;

  env_ = before;
  start(e);
  if (cond) emit(Assume{mk_not(*cond)});
  std::string e_end = cur_;
  auto env_e = env_;

  std::string j = gen_label();
  for (auto& [var, term_t] : env_t) {
    const Term& term_e = env_e.at(var);
    if (term_t == term_e) continue;
    Term v = fresh_version(var, term_t.sort());
    proc_.mutable_block(t_end).statements.push_back(Assume{mk_eq(v, term_t)});
    proc_.mutable_block(e_end).statements.push_back(Assume{mk_eq(v, term_e)});
    env_e[var] = v;
  }
  env_ = env_e;
  terminate(t_end, {j});
  terminate(e_end, {j});
  start(j);
}

void ProcLowering::call(const Stmt& s) {
  int target_level = 0;
  if (owner_.same_scc(decl_.name, s.name)) {
    target_level = level_ + 1;
    if (target_level > owner_.depth()) {
      emit(Assume{mk_false()});
      return;
    }
  }
  std::vector<Term> actuals;
  for (const auto& a : s.args) actuals.push_back(expr(a));
  std::string callee = owner_.lower_proc(s.name, target_level);
  bool callee_fails = owner_.may_fail(s.name);
  std::optional<Term> err;
  if (callee_fails) {
    std::string n = "$e." + std::to_string(++err_versions_);
    proc_.locals.push_back({n, Sort::Bool});
    err = mk_var(n, Sort::Bool);
    actuals.push_back(*err);
  }
  emit(Call{callee, std::move(actuals)});
  std::string call_block = cur_;
  if (!callee_fails) {
    std::string next = gen_label();
    terminate(call_block, {next});
    start(next);
    return;
  }
  std::string propagate = gen_label();
  std::string cont = gen_label();
  terminate(call_block, {propagate, cont});
  start(propagate);
  emit(Assume{*err});
  fail_exit(propagate);
  start(cont);
  emit(Assume{mk_not(*err)});
}

}  // namespace

CoreProgram lower(const SurfaceProgram& sp, int unroll_depth) {
  if (unroll_depth <= 0)
    throw FrontendError(FrontendError::Kind::Lowering, {1, 1}, "unroll depth must be positive");
  CoreProgram p = Lowerer(sp, unroll_depth).run();
  p.validate();
  return p;
}

CoreProgram compile(std::string_view text, int unroll_depth) { return lower(parse(text), unroll_depth); }

}  // namespace dbmc
