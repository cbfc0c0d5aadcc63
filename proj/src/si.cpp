#include "dbmc/si.hpp"

namespace dbmc {

std::string_view outcome_name(SIOutcome::Kind k) {
  switch (k) {
    case SIOutcome::Kind::Safe: return "safe";
    case SIOutcome::Kind::Unsafe: return "unsafe";
    case SIOutcome::Kind::NoDecision: return "no-decision";
    case SIOutcome::Kind::Inconclusive: return "inconclusive";
  }
  return "?";
}

void SIState::rollback_to(const SIState& snapshot) {
  const auto decisions = next_decision;
  const auto inlines = inline_assertions;
  VCContext ctx_now = std::move(ctx);
  *this = snapshot;
  ctx_now.rollback_to(snapshot.ctx);
  ctx = std::move(ctx_now);
  next_decision = std::max(decisions, snapshot.next_decision);
  inline_assertions = inlines;
}

namespace {

void add_children(SIState& st, const DynamicCallsite& c, std::set<DynamicCallsite>& opened) {
  for (const auto& s : callsites_of(st.program->procedure(c.procedure()))) {
    auto child = c.push(s);
    st.open.insert(child);
    opened.insert(child);
  }
}

}  // namespace

SIState init_state(const CoreProgram& p, SolverSession& session) {
  if (session.depth() != 0 || !session.active_names().empty())
    throw SIError("initial state requires a fresh solver session");
  SIState st;
  st.program = &p;
  st.session = &session;
  st.ctx = VCContext(&p);
  const auto root = DynamicCallsite::root();
  PartialVC vc = st.ctx.pvc(root);
  const std::string name = inlined_name(root);
  session.assert_named(name, vc.formula());
  st.origins.emplace(name, AssertionOrigin::root());
  st.inlined.insert(root);
  std::set<DynamicCallsite> opened;
  add_children(st, root, opened);
  return st;
}

std::set<DynamicCallsite> inline_site(SIState& st, DynamicCallsite c) {
  if (!st.open.count(c)) throw SIError("callsite " + c.to_string() + " is not open");
  PartialVC vc = st.ctx.pvc(c);
  const std::string name = inlined_name(c);
  st.session->assert_named(name, mk_implies(st.ctx.cvar(c), vc.formula()));
  st.origins.emplace(name, AssertionOrigin::inlined(c));
  ++st.inline_assertions;
  st.open.erase(c);
  st.inlined.insert(c);
  std::set<DynamicCallsite> opened;
  add_children(st, c, opened);
  return opened;
}

void assert_decision(SIState& st, const Decision& d) {
  if (!st.inlined.count(d.site)) throw SIError("decision on " + d.site.to_string() + " outside the call tree");
  const std::string name = decision_name(st.next_decision++);
  st.session->assert_named(name, st.ctx.decision_constraint(d));
  st.origins.emplace(name, AssertionOrigin::of_decision(d));
}

std::set<DynamicCallsite> trace_callsites(const CoreProgram& p, const Trace& t) {
  std::set<DynamicCallsite> out;
  for (const auto& step : t) {
    const Block& b = p.procedure(step.instance.procedure()).block(step.label);
    if (const Call* call = b.call()) out.insert(step.instance.push({step.label, call->callee}));
  }
  return out;
}

Trace extract_trace(SIState& st) {
  // One batched query: f(i_l) for branching blocks, b_l for every block.
  std::vector<Term> terms;
  std::map<std::pair<DynamicCallsite, std::string>, std::size_t> f_index, b_index;
  for (const auto& inst : st.inlined) {
    const Procedure& p = st.program->procedure(inst.procedure());
    for (const auto& blk : p.blocks()) {
      b_index[{inst, blk.label}] = terms.size();
      terms.push_back(st.ctx.control_var(inst, blk.label));
      if (!blk.is_return()) {
        f_index[{inst, blk.label}] = terms.size();
        terms.push_back(mk_control_flow(st.ctx.block_id(inst, blk.label)));
      }
    }
  }
  const auto values = st.session->values(terms);

  Trace trace;
  std::function<void(const DynamicCallsite&)> walk = [&](const DynamicCallsite& inst) {
    const Procedure& p = st.program->procedure(inst.procedure());
    std::string label = p.entry;
    for (;;) {
      if (values[b_index.at({inst, label})] == 0)
        throw SIError("model path enters " + label + " in " + inst.to_string() + " whose control variable is false");
      trace.push_back({inst, label});
      const Block& blk = p.block(label);
      if (const Call* call = blk.call()) {
        auto child = inst.push({label, call->callee});
        if (st.inlined.count(child)) walk(child);
      }
      if (blk.is_return()) return;
      const std::int64_t next = values[f_index.at({inst, label})];
      const std::string* found = nullptr;
      for (const auto& s : blk.successors())
        if (st.ctx.block_id(inst, s) == next) found = &s;
      if (!found)
        throw SIError("model value of f at " + label + " in " + inst.to_string() + " names no successor");
      label = *found;
    }
  };
  walk(DynamicCallsite::root());
  return trace;
}

SIOutcome si_step(SIState& st) {
  SolverSession& s = *st.session;
  SIOutcome out;

  s.push();
  for (const auto& c : st.open) {
    const std::string name = blocked_name(c);
    s.assert_named(name, st.ctx.avoid_constraint(c));
    st.origins[name] = AssertionOrigin::blocked(c);
  }
  CheckResult under = s.check();
  out.under = under.status;
  if (under.unknown()) {
    s.pop();
    out.kind = SIOutcome::Kind::Inconclusive;
    out.reason = under.reason;
    return out;
  }
  if (under.sat()) {
    out.trace = extract_trace(st);
    s.pop();
    out.kind = SIOutcome::Kind::Unsafe;
    return out;
  }
  st.uc.clear();
  for (const auto& name : under.core) {
    auto it = st.origins.find(name);
    if (it == st.origins.end()) continue;
    const auto k = it->second.kind;
    if (k == AssertionOrigin::Kind::InlinedSite || k == AssertionOrigin::Kind::BlockedSite ||
        k == AssertionOrigin::Kind::Root)
      st.uc.insert(it->second.site);
  }
  for (const auto& c : st.open) st.origins.erase(blocked_name(c));
  s.pop();

  if (st.open.empty()) {
    // Nothing was blocked, so the over-approximation is the same query.
    out.over = CheckStatus::Unsat;
    out.kind = SIOutcome::Kind::Safe;
    return out;
  }
  CheckResult over = s.check();
  out.over = over.status;
  if (over.unknown()) {
    out.kind = SIOutcome::Kind::Inconclusive;
    out.reason = over.reason;
    return out;
  }
  if (over.unsat()) {
    out.kind = SIOutcome::Kind::Safe;
    return out;
  }
  Trace t = extract_trace(st);
  std::set<DynamicCallsite> on_trace;
  for (const auto& c : trace_callsites(*st.program, t))
    if (st.open.count(c)) on_trace.insert(c);
  if (on_trace.empty()) throw SIError("over-approximate trace passes through no open callsite");
  for (const auto& c : on_trace) inline_site(st, c);
  out.kind = SIOutcome::Kind::NoDecision;
  out.uc = st.uc;
  out.inlined_now = std::move(on_trace);
  out.open = st.open;
  out.trace = std::move(t);
  return out;
}

SIState setup_partition(const CoreProgram& p, SolverSession& session, const Partition& rho) {
  rho.validate(p);
  session.reset();
  SIState st = init_state(p, session);
  for (const auto& c : rho.tree)
    if (!c.is_root()) inline_site(st, c);
  for (const auto& d : rho.decisions) assert_decision(st, d);
  return st;
}

SIResult solve_partition(const CoreProgram& p, SolverSession& session, const Partition& rho,
                         const StepObserver& observer) {
  SIState st = setup_partition(p, session, rho);
  SIResult r;
  if (observer) observer(0, st, nullptr);
  for (;;) {
    SIOutcome o;
    try {
      o = si_step(st);
    } catch (const SolverError& e) {
      o.kind = SIOutcome::Kind::Inconclusive;
      o.reason = e.what();
    }
    ++r.rounds;
    if (observer) observer(r.rounds, st, &o);
    switch (o.kind) {
      case SIOutcome::Kind::NoDecision: continue;
      case SIOutcome::Kind::Safe: r.verdict = Verdict::Safe; break;
      case SIOutcome::Kind::Unsafe:
        r.verdict = Verdict::Unsafe;
        r.trace = std::move(o.trace);
        break;
      case SIOutcome::Kind::Inconclusive:
        r.verdict = Verdict::Inconclusive;
        r.reason = o.reason;
        break;
    }
    r.inlined = st.inlined;
    return r;
  }
}

SIResult run_sequential(const CoreProgram& p, SolverSession& session, const StepObserver& observer) {
  return solve_partition(p, session, Partition::root(), observer);
}

}  // namespace dbmc
