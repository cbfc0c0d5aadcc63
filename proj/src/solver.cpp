#include "dbmc/solver.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <map>
#include <thread>

namespace dbmc {

std::string default_solver_command() {
  if (const char* env = std::getenv("DBMC_SOLVER"); env && *env) return env;
  return "z3 -in";
}

std::string_view check_status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::Sat: return "sat";
    case CheckStatus::Unsat: return "unsat";
    case CheckStatus::Unknown: return "unknown";
  }
  return "?";
}

std::string SExpr::to_string() const {
  if (!is_list) return atom;
  std::string s = "(";
  for (std::size_t i = 0; i < list.size(); ++i) s += (i ? " " : "") + list[i].to_string();
  return s + ")";
}

namespace {

// Reads one s-expression from a character source with peek()/get().
// String literals keep their quotes; quoted symbols are unquoted.
template <class Source>
SExpr read_sexpr(Source& src) {
  auto skip = [&] {
    for (;;) {
      int c = src.peek();
      if (c == ';') {
        while (src.peek() != '\n') src.get();
      } else if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
        src.get();
      } else {
        return;
      }
    }
  };
  skip();
  int c = src.get();
  SExpr e;
  if (c == '(') {
    e.is_list = true;
    for (;;) {
      skip();
      if (src.peek() == ')') {
        src.get();
        return e;
      }
      e.list.push_back(read_sexpr(src));
    }
  }
  if (c == ')') throw SolverError("unbalanced ')' in solver output");
  if (c == '"') {
    e.atom = "\"";
    for (;;) {
      int d = src.get();
      if (d == '"') {
        if (src.peek() == '"') {
          src.get();
          e.atom += '"';
          continue;
        }
        break;
      }
      e.atom += static_cast<char>(d);
    }
    e.atom += '"';
    return e;
  }
  if (c == '|') {
    for (int d = src.get(); d != '|'; d = src.get()) e.atom += static_cast<char>(d);
    return e;
  }
  e.atom += static_cast<char>(c);
  for (;;) {
    int d = src.peek();
    if (d == '(' || d == ')' || d == ' ' || d == '\n' || d == '\t' || d == '\r' || d == '"' || d == ';') break;
    e.atom += static_cast<char>(src.get());
  }
  return e;
}

struct StringSource {
  std::string_view s;
  std::size_t i = 0;
  int peek() const {
    if (i >= s.size()) throw SolverError("unexpected end of s-expression");
    return static_cast<unsigned char>(s[i]);
  }
  int get() {
    int c = peek();
    ++i;
    return c;
  }
};

std::vector<std::string> tokenize(const std::string& cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote) {
      if (c == quote)
        quote = 0;
      else
        cur += c;
    } else if (c == '"' || c == '\'') {
      quote = c;
      have = true;
    } else if (c == ' ' || c == '\t') {
      if (have) out.push_back(cur);
      cur.clear();
      have = false;
    } else {
      cur += c;
      have = true;
    }
  }
  if (quote) throw SolverError("unterminated quote in solver command: " + cmd);
  if (have) out.push_back(cur);
  if (out.empty()) throw SolverError("empty solver command");
  return out;
}

std::string unquote(const std::string& atom) {
  if (atom.size() >= 2 && atom.front() == '"' && atom.back() == '"') return atom.substr(1, atom.size() - 2);
  return atom;
}

}  // namespace

SExpr parse_sexpr(std::string_view text) {
  StringSource src{text};
  return read_sexpr(src);
}

// ---------------------------------------------------------------------------
// Process plumbing
// ---------------------------------------------------------------------------

struct SolverSession::Process {
  pid_t pid = -1;
  int to = -1;
  int from = -1;
  std::string buf;
  std::size_t pos = 0;
  std::chrono::steady_clock::time_point deadline;

  explicit Process(const std::string& command) {
    static const bool ignore_sigpipe = [] {
      ::signal(SIGPIPE, SIG_IGN);
      return true;
    }();
    (void)ignore_sigpipe;
    auto argv_s = tokenize(command);
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);

    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) || ::pipe2(out_pipe, O_CLOEXEC) || ::pipe2(err_pipe, O_CLOEXEC))
      throw SessionFailed(std::string("pipe: ") + std::strerror(errno));
    pid = ::fork();
    if (pid < 0) throw SessionFailed(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      ::dup2(in_pipe[0], 0);
      ::dup2(out_pipe[1], 1);
      ::execvp(argv[0], argv.data());
      int e = errno;
      [[maybe_unused]] auto n = ::write(err_pipe[1], &e, sizeof e);
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    to = in_pipe[1];
    from = out_pipe[0];
    int e = 0;
    ssize_t n;
    do {
      n = ::read(err_pipe[0], &e, sizeof e);
    } while (n < 0 && errno == EINTR);
    ::close(err_pipe[0]);
    if (n > 0) {
      reap(true);
      throw SessionFailed("cannot start solver '" + argv_s[0] + "': " + std::strerror(e));
    }
  }

  ~Process() {
    if (to >= 0) {
      const char bye[] = "(exit)\n";
      [[maybe_unused]] auto n = ::write(to, bye, sizeof bye - 1);
    }
    reap(false);
  }

  void reap(bool force) {
    if (to >= 0) ::close(to);
    if (from >= 0) ::close(from);
    to = from = -1;
    if (pid <= 0) return;
    if (!force) {
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid, nullptr, WNOHANG) == pid) {
          pid = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    }
    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
    pid = -1;
  }

  void write_all(const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      ssize_t n = ::write(to, s.data() + off, s.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SessionFailed(std::string("solver input closed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void fill() {
    if (pos > 4096 && pos * 2 > buf.size()) {
      buf.erase(0, pos);
      pos = 0;
    }
    for (;;) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw SessionFailed("solver did not answer in time");
      pollfd p{from, POLLIN, 0};
      int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1'000'000)));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw SessionFailed(std::string("poll: ") + std::strerror(errno));
      }
      if (r == 0) continue;
      char chunk[65536];
      ssize_t n = ::read(from, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SessionFailed(std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) throw SessionFailed("solver exited unexpectedly");
      buf.append(chunk, static_cast<std::size_t>(n));
      return;
    }
  }

  int peek() {
    while (pos >= buf.size()) fill();
    return static_cast<unsigned char>(buf[pos]);
  }
  int get() {
    int c = peek();
    ++pos;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

SolverSession::SolverSession(SolverOptions options)
    : options_(std::move(options)), proc_(std::make_unique<Process>(options_.command)) {
  try {
    command("(set-option :print-success true)");
    sync();
    send("(get-info :name)");
    SExpr r = read();
    if (r.is_list && r.list.size() == 2) solver_name_ = unquote(r.list[1].atom);
  } catch (const SessionFailed& e) {
    throw SessionFailed(std::string("solver handshake failed: ") + e.what());
  } catch (const SolverError& e) {
    throw SessionFailed(std::string("solver handshake failed: ") + e.what());
  }
  minimize_ = options_.minimize_cores && solver_name_ == "Z3";
  initialize();
}

SolverSession::~SolverSession() = default;

void SolverSession::initialize() {
  command("(set-option :produce-models true)");
  command("(set-option :produce-unsat-cores true)");
  if (minimize_) command("(set-option :smt.core.minimize true)");
  if (solver_name_ == "Z3") command("(set-option :timeout " + std::to_string(options_.timeout.count()) + ")");
  command("(set-logic QF_UFLIA)");
  command("(declare-fun " + std::string(kControlFlowSymbol) + " (Int) Int)");
}

void SolverSession::send(const std::string& cmd) {
  proc_->write_all(cmd + "\n");
}

void SolverSession::command(const std::string& cmd) {
  send(cmd);
  ++pending_;
}

SExpr SolverSession::read() {
  proc_->deadline = std::chrono::steady_clock::now() + options_.timeout + options_.grace;
  SExpr e = read_sexpr(*proc_);
  if (e.is_list && !e.list.empty() && e.list[0].atom == "error") {
    std::string msg = e.list.size() > 1 ? unquote(e.list[1].atom) : e.to_string();
    throw SolverError("solver error: " + msg);
  }
  return e;
}

void SolverSession::sync() {
  std::string error;
  while (pending_ > 0) {
    --pending_;
    try {
      SExpr e = read();
      if (e.is_list || e.atom != "success") throw SessionFailed("unexpected solver reply: " + e.to_string());
    } catch (const SessionFailed&) {
      pending_ = 0;
      throw;
    } catch (const SolverError& e) {
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw SolverError(error);
}

void SolverSession::declare(const Term& t) {
  std::map<std::string, Sort> vars;
  collect_vars(t, vars);
  for (const auto& [name, sort] : vars) {
    bool known = false;
    for (const auto& scope : decls_) known = known || scope.count(name);
    if (known) continue;
    command("(declare-const " + smt_symbol(name) + " " + std::string(sort_name(sort)) + ")");
    decls_.back().insert(name);
  }
}

bool SolverSession::has_name(const std::string& name) const {
  for (const auto& scope : names_)
    for (const auto& n : scope)
      if (n == name) return true;
  return false;
}

std::vector<std::string> SolverSession::active_names() const {
  std::vector<std::string> out;
  for (const auto& scope : names_) out.insert(out.end(), scope.begin(), scope.end());
  return out;
}

void SolverSession::assert_named(const std::string& name, const Term& t) {
  if (t.sort() != Sort::Bool) throw SolverError("assertion " + name + " is not boolean");
  if (has_name(name)) throw SolverError("assertion name " + name + " already used");
  declare(t);
  command("(assert (! " + to_smt(t) + " :named " + smt_symbol(name) + "))");
  names_.back().push_back(name);
  last_sat_ = false;
}

void SolverSession::push() {
  command("(push 1)");
  decls_.emplace_back();
  names_.emplace_back();
  last_sat_ = false;
}

void SolverSession::pop() {
  if (depth() == 0) throw SolverError("pop at depth 0");
  command("(pop 1)");
  decls_.pop_back();
  names_.pop_back();
  last_sat_ = false;
}

void SolverSession::reset() {
  send("(reset)");
  ++pending_;
  // Some solvers drop print-success on reset and some keep it; re-enable it
  // and resynchronize on an echo marker.
  send("(set-option :print-success true)");
  send("(echo \"dbmc-sync\")");
  proc_->deadline = std::chrono::steady_clock::now() + options_.timeout + options_.grace;
  for (;;) {
    SExpr e = read_sexpr(*proc_);
    if (!e.is_list && (e.atom == "dbmc-sync" || e.atom == "\"dbmc-sync\"")) break;
    if (!e.is_list && e.atom == "success") continue;
    throw SessionFailed("unexpected solver reply during reset: " + e.to_string());
  }
  pending_ = 0;
  decls_.assign(1, {});
  names_.assign(1, {});
  last_sat_ = false;
  initialize();
}

CheckResult SolverSession::check() {
  sync();
  send("(check-sat)");
  ++checks_;
  SExpr r = read();
  CheckResult out;
  last_sat_ = false;
  if (r.atom == "sat") {
    out.status = CheckStatus::Sat;
    last_sat_ = true;
  } else if (r.atom == "unsat") {
    out.status = CheckStatus::Unsat;
    send("(get-unsat-core)");
    SExpr core = read();
    if (!core.is_list) throw SessionFailed("malformed unsat core: " + core.to_string());
    for (const auto& n : core.list) out.core.insert(n.atom);
  } else if (r.atom == "unknown") {
    send("(get-info :reason-unknown)");
    SExpr why = read();
    std::string reason = why.is_list && why.list.size() == 2 ? unquote(why.list[1].atom) : why.to_string();
    if (reason.find("timeout") != std::string::npos || reason.find("canceled") != std::string::npos ||
        reason.find("resource") != std::string::npos)
      reason = "timeout";
    out.reason = reason;
  } else {
    throw SessionFailed("unexpected check-sat reply: " + r.to_string());
  }
  return out;
}

std::vector<std::int64_t> SolverSession::values(const std::vector<Term>& terms) {
  if (!last_sat_) throw SolverError("model requested without a preceding sat check");
  if (terms.empty()) return {};
  sync();
  std::string cmd = "(get-value (";
  for (const auto& t : terms) cmd += to_smt(t) + " ";
  cmd += "))";
  send(cmd);
  SExpr r = read();
  if (!r.is_list || r.list.size() != terms.size()) throw SessionFailed("malformed get-value reply");
  std::vector<std::int64_t> out;
  out.reserve(terms.size());
  for (const auto& pair : r.list) {
    if (!pair.is_list || pair.list.size() != 2) throw SessionFailed("malformed get-value entry");
    const SExpr& v = pair.list[1];
    try {
      if (!v.is_list) {
        if (v.atom == "true")
          out.push_back(1);
        else if (v.atom == "false")
          out.push_back(0);
        else
          out.push_back(std::stoll(v.atom));
      } else if (v.list.size() == 2 && v.list[0].atom == "-") {
        out.push_back(-std::stoll(v.list[1].atom));
      } else {
        throw SessionFailed("unsupported model value " + v.to_string());
      }
    } catch (const std::logic_error&) {
      throw SessionFailed("unsupported model value " + v.to_string());
    }
  }
  return out;
}

}  // namespace dbmc
