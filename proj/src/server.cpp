#include "dbmc/server.hpp"

#include <algorithm>

namespace dbmc {

const std::deque<ServerState::Entry>& ServerState::queue(ClientId id) const {
  static const std::deque<Entry> empty;
  auto it = q_.find(id);
  return it == q_.end() ? empty : it->second;
}

void ServerState::require_registered(ClientId id) const {
  if (!registered_.count(id)) throw ProtocolError("message from unregistered client " + std::to_string(id));
}

std::vector<Outgoing> ServerState::handle(ClientId from, const Message& m) {
  std::vector<Outgoing> out;
  if (verdict_) return out;

  if (const auto* h = std::get_if<msg::Hello>(&m)) {
    if (h->id != from) throw ProtocolError("HELLO id does not match the connection");
    if (!registered_.insert(from).second) throw ProtocolError("client " + std::to_string(from) + " registered twice");
    q_[from];
    dispatch(out);
    return out;
  }
  require_registered(from);

  if (const auto* s = std::get_if<msg::SendPartition>(&m)) {
    auto& q = q_[from];
    const std::uint64_t seq = next_seq_++;
    q.push_front({seq, s->partition});
    ledger_[seq] = Fate::Queued;
    ++created_;
    max_queue_depth_ = std::max(max_queue_depth_, q.size());
    out.push_back({from, msg::Ack{compute_delta(q.size(), wt_.size(), config_.delta_c, config_.k)}});
    dispatch(out);
  } else if (std::holds_alternative<msg::GetPartition>(m)) {
    if (std::find(wt_.begin(), wt_.end(), from) != wt_.end())
      throw ProtocolError("client " + std::to_string(from) + " is already waiting");
    wt_.push_back(from);
    dispatch(out);
  } else if (std::holds_alternative<msg::Pop>(m)) {
    auto& q = q_[from];
    if (q.empty()) {
      out.push_back({from, msg::PopReply{false}});
    } else {
      ledger_[q.front().seq] = Fate::Popped;
      q.pop_front();
      out.push_back({from, msg::PopReply{true}});
    }
  } else if (const auto* o = std::get_if<msg::Outcome>(&m)) {
    if (o->verdict == Verdict::Unsafe) trace_ = o->trace;
    if (o->verdict != Verdict::Safe) {
      finish(o->verdict, out);
      return out;
    }
  } else if (const auto* st = std::get_if<msg::Stats>(&m)) {
    stats_[from] = *st;
  } else {
    throw ProtocolError("unexpected " + std::string(message_type(m)) + " from client " + std::to_string(from));
  }
  check_termination(out);
  return out;
}

void ServerState::dispatch(std::vector<Outgoing>& out) {
  if (root_pending_) {
    if (wt_.empty() || registered_.size() < config_.clients_expected) return;
    root_pending_ = false;
    ClientId id = wt_.front();
    wt_.pop_front();
    ledger_[0] = Fate::Dispatched;
    grants_.push_back({id, 0});
    ++dispatches_;
    out.push_back({id, msg::Grant{Partition::root()}});
  }
  while (!wt_.empty()) {
    ClientId best = 0;
    std::size_t best_len = 0;
    for (const auto& [id, q] : q_)
      if (q.size() > best_len) {
        best = id;
        best_len = q.size();
      }
    if (best_len == 0) return;
    ClientId to = wt_.front();
    wt_.pop_front();
    Entry e = std::move(q_[best].back());
    q_[best].pop_back();
    ledger_[e.seq] = Fate::Dispatched;
    grants_.push_back({to, e.seq});
    ++dispatches_;
    out.push_back({to, msg::Grant{std::move(e.partition)}});
  }
}

void ServerState::check_termination(std::vector<Outgoing>& out) {
  if (verdict_ || root_pending_ || registered_.empty()) return;
  for (const auto& [id, q] : q_)
    if (!q.empty()) return;
  if (wt_.size() != registered_.size()) return;
  finish(Verdict::Safe, out);
}

void ServerState::finish(Verdict v, std::vector<Outgoing>& out) {
  verdict_ = v;
  for (ClientId id : registered_) out.push_back({id, msg::Kill{}});
}

std::vector<Outgoing> ServerState::disconnect(ClientId id) {
  std::vector<Outgoing> out;
  if (verdict_ || !registered_.count(id)) return out;
  auto w = std::find(wt_.begin(), wt_.end(), id);
  const bool idle = w != wt_.end();
  registered_.erase(id);
  if (!idle) {
    finish(Verdict::Inconclusive, out);
    return out;
  }
  wt_.erase(w);
  dispatch(out);
  check_termination(out);
  return out;
}

std::vector<Outgoing> ServerState::abort() {
  std::vector<Outgoing> out;
  if (!verdict_) finish(Verdict::Inconclusive, out);
  return out;
}

}  // namespace dbmc
