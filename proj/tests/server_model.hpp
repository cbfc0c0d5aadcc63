#pragma once

// Exhaustive exploration of server handler interleavings with scripted
// clients. Each client reacts to GRANT by publishing one must-reach child
// (while the partition has fewer than `max_decisions` decisions), then
// either pops and reports Safe whatever the reply, or reports Safe at once;
// then it asks for more work.

#include <algorithm>
#include <deque>
#include <string>
#include <unordered_set>
#include <vector>

#include "dbmc/server.hpp"

namespace model {

using namespace dbmc;

struct Client {
  std::uint64_t minted = 0;
  bool killed = false;
};

struct World {
  ServerState server;
  std::vector<std::deque<Message>> up, down;
  std::vector<Client> clients;
  std::uint64_t solved = 0;
};

struct Stats {
  std::unordered_set<std::string> seen;
  std::uint64_t states = 0;
  std::uint64_t schedules = 0;
  std::uint64_t safe = 0;
  std::uint64_t violations = 0;
  std::string first_violation;
};

struct Config {
  std::size_t clients = 2;
  std::size_t max_decisions = 2;
  bool pop_after_split = true;
  /// When set, the transport may deliver a client's OUTCOME and
  /// GET_PARTITION ahead of an earlier SEND_PARTITION.
  bool allow_reordering = false;
  std::uint64_t max_schedules = 2'000'000;
};

inline World initial(const Config& cfg) {
  World w{ServerState({cfg.clients, 0.5, 20}), {}, {}, {}, 0};
  w.up.resize(cfg.clients + 1);
  w.down.resize(cfg.clients + 1);
  w.clients.resize(cfg.clients + 1);
  for (ClientId c = 1; c <= cfg.clients; ++c) {
    w.up[c].push_back(msg::Hello{c});
    w.up[c].push_back(msg::GetPartition{c});
  }
  return w;
}

inline void react(World& w, ClientId c, const Message& m, const Config& cfg) {
  auto& up = w.up[c];
  if (std::holds_alternative<msg::Kill>(m)) {
    w.clients[c].killed = true;
  } else if (const auto* g = std::get_if<msg::Grant>(&m)) {
    ++w.solved;
    if (g->partition.decisions.size() < cfg.max_decisions) {
      Partition child = g->partition;
      DynamicCallsite s = DynamicCallsite::root().push(
          {"c" + std::to_string(c) + "n" + std::to_string(w.clients[c].minted++), "g"});
      child.tree.insert(s);
      child.decisions.insert({DecisionKind::MustReach, s});
      up.push_back(msg::SendPartition{c, child});
      if (cfg.pop_after_split) {
        up.push_back(msg::Pop{c});
        return;
      }
      up.push_back(msg::Outcome{c, Verdict::Safe, {}});
      up.push_back(msg::GetPartition{c});
    } else {
      up.push_back(msg::Outcome{c, Verdict::Safe, {}});
      up.push_back(msg::GetPartition{c});
    }
  } else if (const auto* r = std::get_if<msg::PopReply>(&m)) {
    if (r->yes) ++w.solved;
    up.push_back(msg::Outcome{c, Verdict::Safe, {}});
    up.push_back(msg::GetPartition{c});
  }
}

/// Checks a finished schedule: conservation and that nothing is in flight.
inline std::string judge(const World& w) {
  const auto& s = w.server;
  if (!s.verdict()) return "no verdict";
  if (*s.verdict() != Verdict::Safe) return "verdict is not safe";
  for (const auto& [seq, fate] : s.ledger())
    if (fate == ServerState::Fate::Queued) return "partition " + std::to_string(seq) + " left queued";
  for (std::size_t c = 1; c < w.up.size(); ++c)
    for (const auto& m : w.up[c])
      if (std::holds_alternative<msg::SendPartition>(m)) return "partition still in flight at the verdict";
  if (w.solved != s.partitions_created() + 1) return "solved count differs from created + 1";
  std::set<std::uint64_t> granted;
  for (const auto& [to, seq] : s.grants())
    if (!granted.insert(seq).second) return "partition dispatched twice";
  return {};
}

/// Everything that determines the future of a world and its judgement.
inline std::string key(const World& w) {
  const auto& s = w.server;
  std::string k;
  for (ClientId c = 1; c < w.up.size(); ++c) {
    k += "|c" + std::to_string(c) + ":" + std::to_string(w.clients[c].minted) + (w.clients[c].killed ? "k" : "");
    for (const auto& e : s.queue(c)) k += " q" + std::to_string(e.seq);
    for (const auto& m : w.up[c]) k += " u" + encode(m);
    for (const auto& m : w.down[c]) k += " d" + encode(m);
  }
  k += "|w";
  for (ClientId c : s.waiting()) k += " " + std::to_string(c);
  k += "|r" + std::to_string(s.registered().size()) + (s.root_pending() ? "p" : "") +
       (s.verdict() ? std::string(verdict_name(*s.verdict())) : "") + "|s" + std::to_string(w.solved) + "|l";
  for (const auto& [seq, fate] : s.ledger()) k += " " + std::to_string(seq) + ":" + std::to_string(int(fate));
  std::vector<std::pair<ClientId, std::uint64_t>> g = s.grants();
  std::sort(g.begin(), g.end());
  k += "|g";
  for (const auto& [c, seq] : g) k += " " + std::to_string(c) + ":" + std::to_string(seq);
  return k;
}

inline void explore(World& w, const Config& cfg, Stats& st) {
  if (st.states >= cfg.max_schedules) return;
  if (!st.seen.insert(key(w)).second) return;
  ++st.states;
  if (w.server.verdict()) {
    ++st.schedules;
    std::string v = judge(w);
    if (v.empty()) {
      ++st.safe;
    } else if (st.violations++ == 0) {
      st.first_violation = v;
    }
    return;
  }
  bool any = false;
  for (ClientId c = 1; c < w.up.size(); ++c) {
    if (!w.up[c].empty()) {
      // in-order delivery, or (if allowed) a later message overtaking a
      // SEND_PARTITION at the head
      std::vector<std::size_t> picks{0};
      if (cfg.allow_reordering && std::holds_alternative<msg::SendPartition>(w.up[c][0]))
        for (std::size_t k = 1; k < w.up[c].size(); ++k) picks.push_back(k);
      for (std::size_t k : picks) {
        any = true;
        World next = w;
        Message m = next.up[c][k];
        next.up[c].erase(next.up[c].begin() + static_cast<std::ptrdiff_t>(k));
        for (auto& o : next.server.handle(c, m)) next.down[o.to].push_back(o.msg);
        explore(next, cfg, st);
      }
    }
    if (!w.down[c].empty()) {
      any = true;
      World next = w;
      Message m = next.down[c].front();
      next.down[c].pop_front();
      react(next, c, m, cfg);
      explore(next, cfg, st);
    }
  }
  if (!any) {
    ++st.schedules;
    if (st.violations++ == 0) st.first_violation = "deadlock without a verdict";
  }
}

inline Stats run(const Config& cfg) {
  Stats st;
  World w = initial(cfg);
  explore(w, cfg, st);
  return st;
}

}  // namespace model
