#include "dbmc/protocol.hpp"

namespace dbmc {

using nlohmann::json;

namespace {

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

std::string_view verdict_wire(Verdict v) { return verdict_name(v); }

Verdict verdict_from_wire(const std::string& s) {
  if (s == "safe") return Verdict::Safe;
  if (s == "unsafe") return Verdict::Unsafe;
  if (s == "inconclusive") return Verdict::Inconclusive;
  throw ProtocolError("unknown verdict '" + s + "'");
}

}  // namespace

std::string_view message_type(const Message& m) {
  return std::visit(overloaded{
                        [](const msg::Hello&) { return "HELLO"; },
                        [](const msg::GetPartition&) { return "GET_PARTITION"; },
                        [](const msg::Grant&) { return "GRANT"; },
                        [](const msg::SendPartition&) { return "SEND_PARTITION"; },
                        [](const msg::Ack&) { return "ACK"; },
                        [](const msg::Pop&) { return "POP"; },
                        [](const msg::PopReply&) { return "POP_REPLY"; },
                        [](const msg::Outcome&) { return "OUTCOME"; },
                        [](const msg::Kill&) { return "KILL"; },
                        [](const msg::Stats&) { return "STATS"; },
                    },
                    m);
}

json site_to_json(const DynamicCallsite& c) {
  json j = json::array();
  for (std::size_t i = 1; i < c.frames().size(); ++i) j.push_back({c.frames()[i].label, c.frames()[i].callee});
  return j;
}

DynamicCallsite site_from_json(const json& j) {
  if (!j.is_array()) throw ProtocolError("site must be an array of frames");
  std::vector<StaticCallsite> frames{kMainFrame};
  for (const auto& f : j) {
    if (!f.is_array() || f.size() != 2 || !f[0].is_string() || !f[1].is_string())
      throw ProtocolError("frame must be [label, callee]");
    frames.push_back({f[0].get<std::string>(), f[1].get<std::string>()});
  }
  return DynamicCallsite::from_frames(std::move(frames));
}

json partition_to_json(const Partition& p) {
  json tree = json::array();
  for (const auto& c : p.tree) tree.push_back(site_to_json(c));
  json decisions = json::array();
  for (const auto& d : p.decisions)
    decisions.push_back({{"kind", d.kind == DecisionKind::Avoid ? "avoid" : "mustreach"}, {"site", site_to_json(d.site)}});
  return {{"tree", tree}, {"decisions", decisions}};
}

Partition partition_from_json(const json& j) {
  if (!j.is_object() || !j.contains("tree") || !j.contains("decisions"))
    throw ProtocolError("partition needs tree and decisions");
  Partition p;
  p.tree.clear();
  for (const auto& s : j.at("tree")) p.tree.insert(site_from_json(s));
  p.tree.insert(DynamicCallsite::root());
  for (const auto& d : j.at("decisions")) {
    const std::string kind = d.at("kind").get<std::string>();
    DecisionKind k;
    if (kind == "avoid")
      k = DecisionKind::Avoid;
    else if (kind == "mustreach")
      k = DecisionKind::MustReach;
    else
      throw ProtocolError("unknown decision kind '" + kind + "'");
    p.decisions.insert({k, site_from_json(d.at("site"))});
  }
  try {
    p.validate();
  } catch (const ProgramError& e) {
    throw ProtocolError(std::string("malformed partition: ") + e.what());
  }
  return p;
}

json trace_to_json(const Trace& t) {
  json j = json::array();
  for (const auto& s : t) j.push_back({site_to_json(s.instance), s.label});
  return j;
}

Trace trace_from_json(const json& j) {
  Trace t;
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2) throw ProtocolError("trace step must be [site, label]");
    t.push_back({site_from_json(s[0]), s[1].get<std::string>()});
  }
  return t;
}

json to_json(const Message& m) {
  json j = std::visit(
      overloaded{
          [](const msg::Hello& x) { return json{{"id", x.id}}; },
          [](const msg::GetPartition& x) { return json{{"id", x.id}}; },
          [](const msg::Grant& x) { return json{{"partition", partition_to_json(x.partition)}}; },
          [](const msg::SendPartition& x) { return json{{"id", x.id}, {"partition", partition_to_json(x.partition)}}; },
          [](const msg::Ack& x) { return json{{"delta", x.delta}}; },
          [](const msg::Pop& x) { return json{{"id", x.id}}; },
          [](const msg::PopReply& x) { return json{{"yes", x.yes}}; },
          [](const msg::Outcome& x) {
            return json{{"id", x.id}, {"verdict", verdict_wire(x.verdict)}, {"trace", trace_to_json(x.trace)}};
          },
          [](const msg::Kill&) { return json::object(); },
          [](const msg::Stats& x) {
            json inl = json::array();
            for (const auto& c : x.inlined) inl.push_back(site_to_json(c));
            return json{{"id", x.id}, {"splits", x.splits}, {"solved", x.solved}, {"inlined", inl}};
          },
      },
      m);
  j["t"] = message_type(m);
  return j;
}

Message from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("t")) throw ProtocolError("message without type");
    const std::string t = j.at("t").get<std::string>();
    auto id = [&] { return j.at("id").get<ClientId>(); };
    if (t == "HELLO") return msg::Hello{id()};
    if (t == "GET_PARTITION") return msg::GetPartition{id()};
    if (t == "GRANT") return msg::Grant{partition_from_json(j.at("partition"))};
    if (t == "SEND_PARTITION") return msg::SendPartition{id(), partition_from_json(j.at("partition"))};
    if (t == "ACK") return msg::Ack{j.at("delta").get<double>()};
    if (t == "POP") return msg::Pop{id()};
    if (t == "POP_REPLY") return msg::PopReply{j.at("yes").get<bool>()};
    if (t == "OUTCOME") {
      Trace tr = j.contains("trace") ? trace_from_json(j.at("trace")) : Trace{};
      return msg::Outcome{id(), verdict_from_wire(j.at("verdict").get<std::string>()), std::move(tr)};
    }
    if (t == "KILL") return msg::Kill{};
    if (t == "STATS") {
      msg::Stats s{id(), j.at("splits").get<std::uint64_t>(), j.at("solved").get<std::uint64_t>(), {}};
      for (const auto& c : j.at("inlined")) s.inlined.insert(site_from_json(c));
      return s;
    }
    throw ProtocolError("unknown message type '" + t + "'");
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  } catch (const ProgramError& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
}

std::string encode(const Message& m) { return to_json(m).dump(); }

Message decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace dbmc
