#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>

#include <json.hpp>

#include "dbmc/program.hpp"

namespace dbmc {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ClientId = std::uint64_t;

namespace msg {

struct Hello { ClientId id; };
struct GetPartition { ClientId id; };
struct Grant { Partition partition; };
struct SendPartition { ClientId id; Partition partition; };
struct Ack { double delta; };
struct Pop { ClientId id; };
struct PopReply { bool yes; };
struct Outcome { ClientId id; Verdict verdict; Trace trace; };
struct Kill {};
/// Per-client counters, sent alongside each outcome.
struct Stats {
  ClientId id;
  std::uint64_t splits = 0;
  std::uint64_t solved = 0;
  std::set<DynamicCallsite> inlined;
};

}  // namespace msg

using Message = std::variant<msg::Hello, msg::GetPartition, msg::Grant, msg::SendPartition, msg::Ack, msg::Pop,
                             msg::PopReply, msg::Outcome, msg::Kill, msg::Stats>;

std::string_view message_type(const Message& m);

nlohmann::json site_to_json(const DynamicCallsite& c);
DynamicCallsite site_from_json(const nlohmann::json& j);
nlohmann::json partition_to_json(const Partition& p);
Partition partition_from_json(const nlohmann::json& j);
nlohmann::json trace_to_json(const Trace& t);
Trace trace_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Message& m);
/// Throws ProtocolError on malformed input.
Message from_json(const nlohmann::json& j);

/// One line of the wire format, without the trailing newline.
std::string encode(const Message& m);
Message decode(std::string_view line);

}  // namespace dbmc
