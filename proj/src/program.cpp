#include "dbmc/program.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace dbmc {

const Call* Block::call() const {
  for (const auto& s : statements)
    if (const auto* c = std::get_if<Call>(&s)) return c;
  return nullptr;
}

const std::vector<std::string>& Block::successors() const {
  static const std::vector<std::string> kNone;
  if (const auto* g = std::get_if<Goto>(&terminator)) return g->targets;
  return kNone;
}

Block& Procedure::add_block(Block b) {
  if (index_.count(b.label)) throw ProgramError("duplicate block label " + b.label + " in " + name);
  index_.emplace(b.label, blocks_.size());
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

const Block* Procedure::find(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? nullptr : &blocks_[it->second];
}

const Block& Procedure::block(const std::string& label) const {
  const Block* b = find(label);
  if (!b) throw ProgramError("no block " + label + " in procedure " + name);
  return *b;
}

Block& Procedure::mutable_block(const std::string& label) {
  auto it = index_.find(label);
  if (it == index_.end()) throw ProgramError("no block " + label + " in procedure " + name);
  return blocks_[it->second];
}

std::map<std::string, std::vector<std::string>> Procedure::predecessors() const {
  std::map<std::string, std::vector<std::string>> preds;
  for (const auto& b : blocks_) preds[b.label];
  for (const auto& b : blocks_)
    for (const auto& s : b.successors()) {
      auto& v = preds[s];
      if (std::find(v.begin(), v.end(), b.label) == v.end()) v.push_back(b.label);
    }
  return preds;
}

std::vector<std::string> Procedure::topological_order() const {
  enum class Mark { None, Active, Done };
  std::map<std::string, Mark> mark;
  std::vector<std::string> post;
  std::function<void(const Block&)> visit = [&](const Block& b) {
    mark[b.label] = Mark::Active;
    for (const auto& s : b.successors()) {
      const Block* t = find(s);
      if (!t) throw ProgramError("goto to unknown label " + s + " in " + name);
      Mark m = mark[s];
      if (m == Mark::Active) throw ProgramError("cyclic control flow at " + s + " in " + name);
      if (m == Mark::None) visit(*t);
    }
    mark[b.label] = Mark::Done;
    post.push_back(b.label);
  };
  for (const auto& b : blocks_)
    if (mark[b.label] == Mark::None) visit(b);
  std::reverse(post.begin(), post.end());
  return post;
}

const Procedure& CoreProgram::procedure(const std::string& name) const {
  auto it = procedures.find(name);
  if (it == procedures.end()) throw ProgramError("unknown procedure " + name);
  return it->second;
}

void CoreProgram::validate() const {
  auto main_it = procedures.find("main");
  if (main_it == procedures.end()) throw ProgramError("program has no main procedure");
  if (!main_it->second.formals.empty()) throw ProgramError("main must not take formals");

  for (const auto& [name, proc] : procedures) {
    if (name != proc.name) throw ProgramError("procedure table key mismatch for " + proc.name);
    if (!proc.find(proc.entry)) throw ProgramError("entry label missing in " + name);
    for (const auto& b : proc.blocks()) {
      int calls = 0;
      for (const auto& s : b.statements) {
        if (const auto* a = std::get_if<Assume>(&s)) {
          if (a->expr.sort() != Sort::Bool) throw ProgramError("non-boolean assume in " + name);
          continue;
        }
        const auto& c = std::get<Call>(s);
        ++calls;
        auto callee = procedures.find(c.callee);
        if (callee == procedures.end())
          throw ProgramError("call to undeclared procedure " + c.callee + " in " + name);
        const auto& formals = callee->second.formals;
        if (formals.size() != c.actuals.size())
          throw ProgramError("arity mismatch in call to " + c.callee + " from " + name);
        for (std::size_t i = 0; i < formals.size(); ++i)
          if (formals[i].sort != c.actuals[i].sort())
            throw ProgramError("sort mismatch for argument " + std::to_string(i) + " of " + c.callee);
      }
      if (calls > 1) throw ProgramError("block " + b.label + " of " + name + " has more than one call");
      for (const auto& s : b.successors())
        if (!proc.find(s)) throw ProgramError("goto to unknown label " + s + " in " + name);
    }
    proc.topological_order();  // throws on cycles
  }

  // Call graph acyclicity.
  enum class Mark { None, Active, Done };
  std::map<std::string, Mark> mark;
  std::function<void(const std::string&)> visit = [&](const std::string& n) {
    mark[n] = Mark::Active;
    for (const auto& b : procedure(n).blocks())
      if (const Call* c = b.call()) {
        Mark m = mark[c->callee];
        if (m == Mark::Active) throw ProgramError("recursive call cycle through " + c->callee);
        if (m == Mark::None) visit(c->callee);
      }
    mark[n] = Mark::Done;
  };
  for (const auto& [name, _] : procedures)
    if (mark[name] == Mark::None) visit(name);
}

std::string to_string(const CoreProgram& p) {
  std::ostringstream os;
  auto vars = [&](const std::vector<TypedVar>& vs) {
    for (std::size_t i = 0; i < vs.size(); ++i)
      os << (i ? ", " : "") << vs[i].name << ": " << sort_name(vs[i].sort);
  };
  for (const auto& [name, proc] : p.procedures) {
    os << "procedure " << name << "(";
    vars(proc.formals);
    os << ") {\n";
    if (!proc.locals.empty()) {
      os << "  var ";
      vars(proc.locals);
      os << ";\n";
    }
    for (const auto& b : proc.blocks()) {
      os << "  " << b.label << ":" << (b.label == proc.entry ? "  // entry" : "") << "\n";
      for (const auto& s : b.statements) {
        if (const auto* a = std::get_if<Assume>(&s)) {
          os << "    assume " << to_smt(a->expr) << ";\n";
        } else {
          const auto& c = std::get<Call>(s);
          os << "    call " << c.callee << "(";
          for (std::size_t i = 0; i < c.actuals.size(); ++i)
            os << (i ? ", " : "") << to_smt(c.actuals[i]);
          os << ");\n";
        }
      }
      if (b.is_return()) {
        os << "    return;\n";
      } else {
        os << "    goto ";
        const auto& ts = b.successors();
        for (std::size_t i = 0; i < ts.size(); ++i) os << (i ? ", " : "") << ts[i];
        os << ";\n";
      }
    }
    os << "}\n";
  }
  return os.str();
}

std::set<StaticCallsite> callsites_of(const Procedure& p) {
  std::set<StaticCallsite> out;
  for (const auto& b : p.blocks())
    if (const Call* c = b.call()) out.insert({b.label, c->callee});
  return out;
}

DynamicCallsite DynamicCallsite::from_frames(std::vector<StaticCallsite> frames) {
  if (frames.empty() || frames.front() != kMainFrame)
    throw ProgramError("dynamic callsite must start with the main frame");
  DynamicCallsite c;
  c.frames_ = std::move(frames);
  return c;
}

DynamicCallsite DynamicCallsite::parent() const {
  if (is_root()) throw ProgramError("the main instance has no parent");
  DynamicCallsite c = *this;
  c.frames_.pop_back();
  return c;
}

DynamicCallsite DynamicCallsite::push(StaticCallsite s) const {
  DynamicCallsite c = *this;
  c.frames_.push_back(std::move(s));
  return c;
}

bool DynamicCallsite::is_prefix_of(const DynamicCallsite& other) const {
  if (frames_.size() > other.frames_.size()) return false;
  return std::equal(frames_.begin(), frames_.end(), other.frames_.begin());
}

std::string DynamicCallsite::path() const {
  std::string s = "main";
  for (std::size_t i = 1; i < frames_.size(); ++i) s += "/" + frames_[i].label + "." + frames_[i].callee;
  return s;
}

std::string DynamicCallsite::to_string() const {
  std::string s = "[main";
  for (std::size_t i = 1; i < frames_.size(); ++i)
    s += ",(" + frames_[i].label + "," + frames_[i].callee + ")";
  return s + "]";
}

bool is_prefix_closed(const CallTree& t) {
  if (!t.count(DynamicCallsite::root())) return false;
  for (const auto& c : t)
    if (!c.is_root() && !t.count(c.parent())) return false;
  return true;
}

std::string to_string(const Decision& d) {
  return std::string(d.kind == DecisionKind::Avoid ? "Avoid" : "MustReach") + d.site.to_string();
}

Partition Partition::with(Decision d) const {
  Partition p = *this;
  p.decisions.insert(std::move(d));
  return p;
}

Partition Partition::without(const Decision& d) const {
  Partition p = *this;
  p.decisions.erase(d);
  return p;
}

void Partition::validate() const {
  if (!is_prefix_closed(tree)) throw ProgramError("partition call tree is not prefix-closed");
  for (const auto& d : decisions) {
    if (d.site.is_root()) throw ProgramError("decision on the main instance");
    if (!tree.count(d.site)) throw ProgramError("decision site " + d.site.to_string() + " not in call tree");
  }
}

void Partition::validate(const CoreProgram& p) const {
  validate();
  for (const auto& c : tree) {
    if (c.is_root()) continue;
    const Procedure& caller = p.procedure(c.parent().procedure());
    const Block* b = caller.find(c.top().label);
    const Call* call = b ? b->call() : nullptr;
    if (!call || call->callee != c.top().callee)
      throw ProgramError("call tree node " + c.to_string() + " is not a callsite of the program");
  }
}

bool trace_visits(const Trace& t, const DynamicCallsite& site) {
  if (site.is_root()) return !t.empty();
  const auto parent = site.parent();
  return std::any_of(t.begin(), t.end(), [&](const TraceStep& s) {
    return s.instance == site || (s.instance == parent && s.label == site.top().label);
  });
}

std::string to_string(const Trace& t) {
  std::string s;
  for (const auto& step : t) {
    if (!s.empty()) s += " -> ";
    s += step.instance.path() + ":" + step.label;
  }
  return s;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Safe: return "safe";
    case Verdict::Unsafe: return "unsafe";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

}  // namespace dbmc
