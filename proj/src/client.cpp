#include "dbmc/client.hpp"

namespace dbmc {

ClientEngine::ClientEngine(const CoreProgram& program, ClientOptions options, Outbox outbox)
    : program_(program), options_(std::move(options)), outbox_(std::move(outbox)) {
  policy_.delta = options_.delta_c;
  policy_.delta_c = options_.delta_c;
  policy_.k = options_.k;
  std::seed_seq seq{options_.seed, options_.id};
  rng_.seed(seq);
}

ClientEngine::~ClientEngine() = default;

double ClientEngine::now() const {
  if (options_.virtual_tick > 0) return static_cast<double>(steps_) * options_.virtual_tick;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
}

void ClientEngine::start() {
  if (phase_ != Phase::Idle) throw ProtocolError("client already started");
  send(msg::Hello{options_.id});
  send(msg::GetPartition{options_.id});
  phase_ = Phase::NeedPartition;
}

void ClientEngine::on_message(const Message& m) {
  if (std::holds_alternative<msg::Kill>(m)) {
    phase_ = Phase::Done;
    st_.reset();
    dstack_.clear();
    session_.reset();
    return;
  }
  if (phase_ == Phase::Done) return;
  if (const auto* a = std::get_if<msg::Ack>(&m)) {
    if (!(a->delta > 0)) throw ProtocolError("non-positive split interval in ACK");
    policy_.delta = a->delta;
    return;
  }
  if (const auto* g = std::get_if<msg::Grant>(&m)) {
    if (phase_ != Phase::NeedPartition) throw ProtocolError("GRANT while not waiting for a partition");
    begin(g->partition);
    return;
  }
  if (const auto* r = std::get_if<msg::PopReply>(&m)) {
    if (phase_ != Phase::AwaitPop) throw ProtocolError("POP_REPLY without a pending POP");
    if (!r->yes) {
      finish(Verdict::Safe, {});
      return;
    }
    steal_back();
    phase_ = Phase::Working;
    maybe_split();
    return;
  }
  throw ProtocolError("client received unexpected " + std::string(message_type(m)));
}

void ClientEngine::begin(const Partition& rho) {
  try {
    rho.validate(program_);
  } catch (const ProgramError& e) {
    throw ProtocolError(std::string("granted partition is malformed: ") + e.what());
  }
  rho_ = rho;
  dstack_.clear();
  stolen_.reset();
  ++solved_;
  try {
    if (!session_) session_ = std::make_unique<SolverSession>(options_.solver);
    st_ = setup_partition(program_, *session_, rho_);
  } catch (const SolverError&) {
    session_.reset();
    finish(Verdict::Inconclusive, {});
    return;
  }
  inlined_union_.insert(st_->inlined.begin(), st_->inlined.end());
  policy_.last_split_at = now();
  phase_ = Phase::Working;
}

void ClientEngine::finish(Verdict v, const Trace& trace) {
  if (stolen_) steal_records_.push_back({*stolen_, v});
  stolen_.reset();
  st_.reset();
  dstack_.clear();
  hand_over_stats();
  send(msg::Outcome{options_.id, v, trace});
  send(msg::GetPartition{options_.id});
  phase_ = Phase::NeedPartition;
}

void ClientEngine::hand_over_stats() {
  send(msg::Stats{options_.id, splits_, solved_, inlined_union_});
}

void ClientEngine::step() {
  if (phase_ != Phase::Working) throw ProtocolError("step() while not working");
  ++steps_;
  SIOutcome o;
  try {
    o = si_step(*st_);
  } catch (const SolverError& e) {
    o.kind = SIOutcome::Kind::Inconclusive;
    o.reason = e.what();
    session_.reset();
  }
  switch (o.kind) {
    case SIOutcome::Kind::Unsafe:
      finish(Verdict::Unsafe, o.trace);
      return;
    case SIOutcome::Kind::Inconclusive:
      finish(Verdict::Inconclusive, {});
      return;
    case SIOutcome::Kind::Safe:
      send(msg::Pop{options_.id});
      phase_ = Phase::AwaitPop;
      return;
    case SIOutcome::Kind::NoDecision:
      rho_.tree.insert(o.inlined_now.begin(), o.inlined_now.end());
      inlined_union_.insert(o.inlined_now.begin(), o.inlined_now.end());
      break;
  }
  maybe_split();
}

void ClientEngine::steal_back() {
  // Only avoid decisions are flipped; must-reach entries above the most
  // recent avoid are discarded.
  for (;;) {
    if (dstack_.empty()) throw ProtocolError("POP granted but no avoid decision to flip");
    Entry e = std::move(dstack_.back());
    dstack_.pop_back();
    session_->pop();
    st_->rollback_to(e.snapshot);
    rho_ = e.rho_before;
    if (e.decision.kind != DecisionKind::Avoid) continue;

    const Decision flipped{DecisionKind::MustReach, e.decision.site};
    Entry mr{flipped, *st_, rho_};
    session_->push();
    assert_decision(*st_, flipped);
    dstack_.push_back(std::move(mr));
    rho_ = rho_.with(flipped);
    ++solved_;
    // An earlier flip's verdict now depends on this one, so it is not recorded.
    stolen_ = rho_;
    return;
  }
}

void ClientEngine::maybe_split() {
  if (!options_.splitting) return;
  if (options_.max_splits && splits_ >= *options_.max_splits) return;
  const double t = now();
  if (!policy_.time_to_split(t)) return;
  std::set<DynamicCallsite> excluded;
  for (const auto& d : rho_.decisions) excluded.insert(d.site);
  auto c = choose_split(st_->inlined, st_->uc, options_.strategy, rng_, excluded);
  if (!c) return;

  const Decision avoid{DecisionKind::Avoid, *c};
  Entry e{avoid, *st_, rho_};
  session_->push();
  assert_decision(*st_, avoid);
  send(msg::SendPartition{options_.id, rho_.with({DecisionKind::MustReach, *c})});
  split_records_.push_back({options_.id, rho_, *c});
  dstack_.push_back(std::move(e));
  rho_ = rho_.with(avoid);
  policy_.last_split_at = t;
  ++splits_;
  // Part of the stolen partition now lives elsewhere.
  stolen_.reset();
}

}  // namespace dbmc
