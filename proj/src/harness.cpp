#include "dbmc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <sstream>

namespace dbmc {

SIResult full_inline_oracle(const CoreProgram& p, SolverSession& session) {
  session.reset();
  SIState st = init_state(p, session);
  while (!st.open.empty()) {
    auto open = st.open;
    for (const auto& c : open) inline_site(st, c);
  }
  SIResult r;
  r.rounds = 1;
  CheckResult c = session.check();
  if (c.sat()) {
    r.verdict = Verdict::Unsafe;
    r.trace = extract_trace(st);
  } else if (c.unsat()) {
    r.verdict = Verdict::Safe;
  } else {
    r.verdict = Verdict::Inconclusive;
    r.reason = c.reason;
  }
  r.inlined = st.inlined;
  return r;
}

std::size_t call_tree_size(const CoreProgram& p) {
  std::map<std::string, std::size_t> memo;
  std::function<std::size_t(const std::string&)> size = [&](const std::string& name) -> std::size_t {
    if (auto it = memo.find(name); it != memo.end()) return it->second;
    std::size_t n = 0;
    for (const auto& s : callsites_of(p.procedure(name))) n += 1 + size(s.callee);
    return memo[name] = n;
  };
  return size("main");
}

std::optional<double> dissimilarity(const std::set<DynamicCallsite>& li, const std::set<DynamicCallsite>& lj) {
  if (li.empty()) return std::nullopt;
  std::size_t common = 0;
  for (const auto& c : li) common += lj.count(c);
  return 1.0 - static_cast<double>(common) / static_cast<double>(li.size());
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

namespace {

// A step computing s_i from s_{i-1}.
struct Seg {
  enum class Kind { Add, Call, Branch } kind = Kind::Add;
  int k = 0;
  int callee = -1;
  std::optional<int> threshold;  // Branch: `s > threshold`, or `*` when absent
  std::vector<Seg> arms;         // Branch: then, else
};

struct GenProc {
  std::string name;
  int level = 0;
  std::vector<Seg> segs;
  std::vector<std::size_t> asserts_after;  // segment indices followed by a valid assertion
};

class Generator {
 public:
  Generator(std::mt19937_64& rng, const CorpusShape& shape) : rng_(rng), shape_(shape) {}

  std::string program(bool unsafe) {
    for (;;) {
      build();
      if (tree_size(0) > shape_.max_sites || tree_size(0) == 0) continue;
      std::set<std::int64_t> finals;
      for (std::int64_t a = 0; a <= 1; ++a) {
        auto r = eval(0, a);
        finals.insert(r.begin(), r.end());
      }
      std::int64_t target;
      if (unsafe) {
        std::vector<std::int64_t> vals(finals.begin(), finals.end());
        target = vals[pick(vals.size())];
      } else {
        std::vector<std::int64_t> gaps;
        for (std::int64_t v = *finals.begin(); v <= *finals.rbegin() + 1; ++v)
          if (!finals.count(v)) gaps.push_back(v);
        target = gaps[pick(gaps.size())];
      }
      return render(target);
    }
  }

 private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  int small(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  void build() {
    memo_.clear();
    procs_.clear();
    levels_.assign(static_cast<std::size_t>(shape_.depth) + 1, {});
    procs_.push_back({"main", 0, {}, {}});
    levels_[0].push_back(0);
    for (int l = 1; l <= shape_.depth; ++l) {
      int n = small(1, shape_.procs_per_level);
      for (int i = 0; i < n; ++i) {
        levels_[l].push_back(static_cast<int>(procs_.size()));
        procs_.push_back({"p" + std::to_string(l) + "_" + std::to_string(i), l, {}, {}});
      }
    }
    for (auto& p : procs_) body(p);
  }

  int callee_below(int level) {
    // Mostly the next level, sometimes deeper.
    int l = level + 1;
    while (l < shape_.depth && coin(0.25)) ++l;
    const auto& cands = levels_[static_cast<std::size_t>(l)];
    return cands[pick(cands.size())];
  }

  Seg leaf(int level, int& calls) {
    Seg s;
    if (level < shape_.depth && calls < shape_.fanout && coin(shape_.call_prob)) {
      s.kind = Seg::Kind::Call;
      s.callee = callee_below(level);
      ++calls;
    } else {
      s.kind = Seg::Kind::Add;
      s.k = small(0, 3);
    }
    return s;
  }

  void body(GenProc& p) {
    int calls = 0;
    int n = small(1, shape_.fanout + 1);
    for (int i = 0; i < n; ++i) {
      if (coin(shape_.branch_prob)) {
        Seg b;
        b.kind = Seg::Kind::Branch;
        if (coin(0.4)) b.threshold = small(0, 4 * p.level + 3);
        b.arms.push_back(leaf(p.level, calls));
        b.arms.push_back(leaf(p.level, calls));
        p.segs.push_back(std::move(b));
      } else {
        p.segs.push_back(leaf(p.level, calls));
      }
      if (p.level > 0 && coin(shape_.assert_density)) p.asserts_after.push_back(p.segs.size() - 1);
    }
  }

  std::size_t tree_size(int proc) {
    std::size_t n = 0;
    std::function<void(const Seg&)> count = [&](const Seg& s) {
      if (s.kind == Seg::Kind::Call) n += 1 + tree_size(s.callee);
      for (const auto& a : s.arms) count(a);
    };
    for (const auto& s : procs_[static_cast<std::size_t>(proc)].segs) count(s);
    return n;
  }

  std::set<std::int64_t> eval_seg(const Seg& s, std::int64_t v) {
    switch (s.kind) {
      case Seg::Kind::Add: return {v + s.k};
      case Seg::Kind::Call: return eval(s.callee, v);
      case Seg::Kind::Branch: {
        if (s.threshold) return eval_seg(v > *s.threshold ? s.arms[0] : s.arms[1], v);
        auto a = eval_seg(s.arms[0], v);
        auto b = eval_seg(s.arms[1], v);
        a.insert(b.begin(), b.end());
        return a;
      }
    }
    return {};
  }

  std::set<std::int64_t> eval(int proc, std::int64_t a) {
    auto key = std::make_pair(proc, a);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::set<std::int64_t> cur{a};
    for (const auto& s : procs_[static_cast<std::size_t>(proc)].segs) {
      std::set<std::int64_t> next;
      for (auto v : cur) {
        auto r = eval_seg(s, v);
        next.insert(r.begin(), r.end());
      }
      cur = std::move(next);
    }
    return memo_[key] = cur;
  }

  static void seg_text(std::ostringstream& o, const Seg& s, const std::string& in, const std::string& out,
                       const std::vector<GenProc>& procs) {
    if (s.kind == Seg::Kind::Add) {
      o << out << " := " << in << " + " << s.k << ";";
    } else {
      o << "call " << procs[static_cast<std::size_t>(s.callee)].name << "(" << in << ", " << out << ");";
    }
  }

  std::string render(std::int64_t target) {
    memo_.clear();
    std::ostringstream o;
    for (const auto& p : procs_) {
      const bool is_main = p.level == 0;
      const std::string a = is_main ? "s0" : "a";
      auto var = [&](std::size_t i) { return i == 0 ? a : "s" + std::to_string(i); };
      o << "procedure " << p.name << (is_main ? "()" : "(a: int, r: int)") << " {\n";
      o << "  var ";
      for (std::size_t i = is_main ? 0 : 1; i <= p.segs.size(); ++i)
        o << var(i) << ": int" << (i == p.segs.size() ? ";\n" : ", ");
      if (is_main) o << "  assume s0 >= 0 && s0 <= 1;\n";
      for (std::size_t i = 0; i < p.segs.size(); ++i) {
        const Seg& s = p.segs[i];
        const std::string in = var(i), out = var(i + 1);
        o << "  ";
        if (s.kind == Seg::Kind::Branch) {
          o << "if (" << (s.threshold ? in + " > " + std::to_string(*s.threshold) : std::string("*")) << ") { ";
          seg_text(o, s.arms[0], in, out, procs_);
          o << " } else { ";
          seg_text(o, s.arms[1], in, out, procs_);
          o << " }";
        } else {
          seg_text(o, s, in, out, procs_);
        }
        o << "\n";
        if (std::find(p.asserts_after.begin(), p.asserts_after.end(), i) != p.asserts_after.end())
          o << "  assert " << out << " >= " << a << ";\n";
      }
      const std::string last = var(p.segs.size());
      if (is_main)
        o << "  assert " << last << " != " << target << ";\n";
      else
        o << "  assume r == " << last << ";\n";
      o << "}\n\n";
    }
    return o.str();
  }

  std::mt19937_64& rng_;
  const CorpusShape& shape_;
  std::vector<GenProc> procs_;
  std::vector<std::vector<int>> levels_;
  std::map<std::pair<int, std::int64_t>, std::set<std::int64_t>> memo_;
};

}  // namespace

std::vector<std::string> gen_corpus(std::uint64_t seed, std::size_t n, const CorpusShape& shape) {
  std::mt19937_64 rng(seed);
  Generator g(rng, shape);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    bool unsafe = std::bernoulli_distribution(shape.unsafe_prob)(rng);
    out.push_back("// generated: seed " + std::to_string(seed) + ", program " + std::to_string(i) + "\n" +
                  g.program(unsafe));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulated cluster
// ---------------------------------------------------------------------------

std::uint64_t RunReport::total_solved() const {
  std::uint64_t n = 0;
  for (const auto& c : clients) n += c.solved;
  return n;
}

namespace {

struct Timed {
  Message msg;
  double at;
};

}  // namespace

RunReport run_simulated(const CoreProgram& p, const ClusterOptions& options) {
  const auto wall_start = std::chrono::steady_clock::now();
  const std::size_t n = options.clients;
  ServerState server({n, options.delta_c, options.k});
  std::vector<std::deque<Timed>> up(n), down(n);
  std::vector<double> clock(n, 0.0);
  double server_clock = 0.0;

  std::vector<std::unique_ptr<ClientEngine>> clients;
  for (std::size_t i = 0; i < n; ++i) {
    ClientOptions co;
    co.id = i + 1;
    co.strategy = options.strategy;
    co.seed = options.seed;
    co.splitting = options.splitting;
    co.max_splits = options.max_splits;
    co.delta_c = options.delta_c;
    co.k = options.k;
    co.virtual_tick = options.delta_c;
    co.solver = options.solver;
    clients.push_back(std::make_unique<ClientEngine>(p, co, [&, i](const Message& m) {
      up[i].push_back({decode(encode(m)), clock[i]});
    }));
  }
  for (auto& c : clients) c->start();

  std::mt19937_64 rng(options.seed);
  RunReport report;
  enum class Ev { Up, Down, Step };
  std::vector<std::pair<Ev, std::size_t>> enabled;
  for (;;) {
    if (server.verdict() &&
        std::all_of(clients.begin(), clients.end(), [](const auto& c) { return c->done(); }))
      break;
    enabled.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (!up[i].empty()) enabled.push_back({Ev::Up, i});
      if (!down[i].empty()) enabled.push_back({Ev::Down, i});
      if (clients[i]->runnable()) enabled.push_back({Ev::Step, i});
    }
    if (enabled.empty()) break;
    if (report.events++ >= options.max_events) {
      report.note = "event bound reached";
      break;
    }
    auto [ev, i] = enabled[std::uniform_int_distribution<std::size_t>(0, enabled.size() - 1)(rng)];
    switch (ev) {
      case Ev::Up: {
        Timed t = std::move(up[i].front());
        up[i].pop_front();
        server_clock = std::max(server_clock, t.at);
        for (auto& o : server.handle(i + 1, t.msg)) down[o.to - 1].push_back({decode(encode(o.msg)), server_clock});
        break;
      }
      case Ev::Down: {
        Timed t = std::move(down[i].front());
        down[i].pop_front();
        clock[i] = std::max(clock[i], t.at);
        clients[i]->on_message(t.msg);
        break;
      }
      case Ev::Step:
        clients[i]->step();
        clock[i] += options.delta_c;
        break;
    }
  }

  report.verdict = server.verdict().value_or(Verdict::Inconclusive);
  if (!server.verdict() && report.note.empty()) report.note = "no verdict";
  report.trace = server.trace();
  report.max_queue_depth = server.max_queue_depth();
  report.dispatch_count = server.dispatch_count();
  report.partitions_created = server.partitions_created();
  for (double c : clock) report.virtual_makespan = std::max(report.virtual_makespan, c);
  for (const auto& c : clients) {
    report.clients.push_back({c->id(), c->inlined_sites(), c->splits(), c->solved(), c->steps()});
    report.splits.insert(report.splits.end(), c->split_records().begin(), c->split_records().end());
    report.steals.insert(report.steals.end(), c->steal_records().begin(), c->steal_records().end());
  }
  std::set<std::uint64_t> granted;
  for (const auto& [id, seq] : server.grants())
    if (!granted.insert(seq).second) report.conservation_ok = false;
  std::size_t queued = 0;
  for (const auto& [seq, fate] : server.ledger()) {
    if (fate == ServerState::Fate::Queued) ++queued;
    if (fate == ServerState::Fate::Dispatched && !granted.count(seq)) report.conservation_ok = false;
  }
  if (report.verdict == Verdict::Safe && queued != 0) report.conservation_ok = false;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

Verdict solve_with_fresh_client(const CoreProgram& p, const Partition& rho, const SolverOptions& solver) {
  std::deque<Message> outbox;
  ClientOptions co;
  co.id = 1;
  co.splitting = false;
  co.solver = solver;
  ClientEngine client(p, co, [&](const Message& m) { outbox.push_back(decode(encode(m))); });
  client.start();
  outbox.clear();
  client.on_message(decode(encode(msg::Grant{rho})));
  for (;;) {
    while (client.runnable()) client.step();
    while (!outbox.empty()) {
      Message m = std::move(outbox.front());
      outbox.pop_front();
      if (std::holds_alternative<msg::Pop>(m)) {
        client.on_message(msg::PopReply{false});
      } else if (const auto* o = std::get_if<msg::Outcome>(&m)) {
        return o->verdict;
      }
    }
    if (!client.runnable()) throw ProtocolError("fresh client stalled without an outcome");
  }
}

}  // namespace dbmc
