#include "dbmc/vcgen.hpp"

namespace dbmc {

std::string inlined_name(const DynamicCallsite& c) { return "inl!" + c.path(); }
std::string blocked_name(const DynamicCallsite& c) { return "blk!" + c.path(); }
std::string decision_name(std::uint64_t n) { return "dec!" + std::to_string(n); }

namespace {

std::string control_name(std::uint64_t k, const std::string& label) {
  return "b!" + std::to_string(k) + "!" + label;
}
std::string must_reach_name(std::uint64_t k, const std::string& label) {
  return "r!" + std::to_string(k) + "!" + label;
}

}  // namespace

const VCContext::Instance& VCContext::instance(const DynamicCallsite& c) const {
  auto it = instances_.find(c);
  if (it == instances_.end()) throw VCError("instance " + c.to_string() + " has not been inlined");
  return it->second;
}

PartialVC VCContext::pvc(const Procedure& p, const DynamicCallsite& c, const std::vector<Term>& actuals) {
  if (actuals.size() != p.formals.size())
    throw VCError("procedure " + p.name + " expects " + std::to_string(p.formals.size()) + " arguments, got " +
                  std::to_string(actuals.size()));
  if (instances_.count(c)) throw VCError("instance " + c.to_string() + " already has a VC");

  Instance inst;
  inst.procedure = p.name;
  inst.number = next_instance_++;
  for (const auto& b : p.blocks()) inst.block_ids[b.label] = next_block_id_++;

  std::map<std::string, Term> subst;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    if (actuals[i].sort() != p.formals[i].sort)
      throw VCError("argument " + std::to_string(i + 1) + " of " + p.name + " has the wrong sort");
    subst.emplace(p.formals[i].name, actuals[i]);
  }
  const std::string suffix = "@" + std::to_string(inst.number);
  for (const auto& v : p.locals) subst.emplace(v.name, mk_var(v.name + suffix, v.sort));

  auto b = [&](const std::string& l) { return mk_var(control_name(inst.number, l), Sort::Bool); };
  auto id = [&](const std::string& l) { return mk_int(inst.block_ids.at(l)); };

  PartialVC vc;
  vc.site = c;
  vc.conjuncts.push_back(b(p.entry));
  for (const auto& blk : p.blocks()) {
    std::vector<Term> body;
    for (const auto& s : blk.statements) {
      if (const auto* a = std::get_if<Assume>(&s)) {
        body.push_back(substitute(a->expr, subst));
      } else {
        const auto& call = std::get<Call>(s);
        std::vector<Term> args;
        for (const auto& t : call.actuals) args.push_back(substitute(t, subst));
        inst.call_actuals[blk.label] = std::move(args);
      }
    }
    if (!blk.is_return()) {
      std::vector<Term> succ;
      for (const auto& s : blk.successors())
        succ.push_back(mk_and({b(s), mk_eq(id(s), mk_control_flow(id(blk.label)))}));
      body.push_back(mk_or(std::move(succ)));
    }
    vc.conjuncts.push_back(mk_implies(b(blk.label), mk_and(std::move(body))));
  }
  instances_.emplace(c, std::move(inst));
  return vc;
}

PartialVC VCContext::pvc(const DynamicCallsite& c) {
  const Procedure& p = program_->procedure(c.procedure());
  if (c.is_root()) return pvc(p, c, {});
  return pvc(p, c, interface_vars(c));
}

std::int64_t VCContext::block_id(const DynamicCallsite& c, const std::string& label) const {
  const auto& inst = instance(c);
  auto it = inst.block_ids.find(label);
  if (it == inst.block_ids.end()) throw VCError("no block " + label + " in " + c.to_string());
  return it->second;
}

Term VCContext::control_var(const DynamicCallsite& c, const std::string& label) const {
  block_id(c, label);
  return mk_var(control_name(instance(c).number, label), Sort::Bool);
}

Term VCContext::must_reach_var(const DynamicCallsite& c, const std::string& label) const {
  block_id(c, label);
  return mk_var(must_reach_name(instance(c).number, label), Sort::Bool);
}

Term VCContext::cvar(const DynamicCallsite& c) const {
  if (c.is_root()) throw VCError("the root has no calling block");
  return control_var(c.parent(), c.top().label);
}

const std::vector<Term>& VCContext::interface_vars(const DynamicCallsite& c) const {
  if (c.is_root()) throw VCError("the root has no interface variables");
  const auto& parent = instance(c.parent());
  auto it = parent.call_actuals.find(c.top().label);
  if (it == parent.call_actuals.end())
    throw VCError("block " + c.top().label + " of " + c.parent().to_string() + " makes no call");
  return it->second;
}

Term VCContext::mr_proc(const DynamicCallsite& c) const {
  const auto& inst = instance(c);
  const Procedure& p = program_->procedure(inst.procedure);
  auto r = [&](const std::string& l) { return mk_var(must_reach_name(inst.number, l), Sort::Bool); };
  auto id = [&](const std::string& l) { return mk_int(inst.block_ids.at(l)); };
  const auto preds = p.predecessors();
  std::vector<Term> parts;
  for (const auto& blk : p.blocks()) {
    Term rhs = mk_true();
    if (blk.label != p.entry) {
      std::vector<Term> alts;
      for (const auto& n : preds.at(blk.label))
        alts.push_back(mk_and({r(n), mk_eq(mk_control_flow(id(n)), id(blk.label))}));
      rhs = mk_or(std::move(alts));
    }
    parts.push_back(mk_implies(r(blk.label), rhs));
  }
  return mk_and(std::move(parts));
}

Term VCContext::mr_chain(const DynamicCallsite& c) const {
  if (c.is_root()) return mk_true();
  const DynamicCallsite parent = c.parent();
  std::vector<Term> parts{must_reach_var(parent, c.top().label), mr_proc(parent)};
  if (!parent.is_root()) parts.push_back(mr_chain(parent));
  return mk_and(std::move(parts));
}

Term VCContext::avoid_constraint(const DynamicCallsite& c) const { return mk_not(cvar(c)); }

Term VCContext::decision_constraint(const Decision& d) const {
  return d.kind == DecisionKind::Avoid ? avoid_constraint(d.site) : mr_chain(d.site);
}

void VCContext::rollback_to(const VCContext& snapshot) {
  instances_ = snapshot.instances_;
}

}  // namespace dbmc
