#pragma once

#include <variant>

#include "medsync/common/trace.hpp"
#include "medsync/wire/address.hpp"
#include "medsync/wire/payload.hpp"

namespace medsync::transport {

inline const char* to_string(wire::ConfigCode c) {
  switch (c) {
    case wire::ConfigCode::kNone: return "none";
    case wire::ConfigCode::kUnknownUnit: return "unknown-unit";
    case wire::ConfigCode::kUnitAlreadyActive: return "unit-already-active";
    case wire::ConfigCode::kWrongUnit: return "wrong-unit";
    case wire::ConfigCode::kDuplicateAutomaton: return "duplicate-automaton";
    case wire::ConfigCode::kNotRegistered: return "not-registered";
    case wire::ConfigCode::kLinkDown: return "link-down";
    case wire::ConfigCode::kLinkUp: return "link-up";
  }
  return "?";
}

/// Trace-friendly rendering of message bodies. Empty fields are omitted.
inline Json describe(const wire::ConfigBody& b) {
  Json j = Json::object();
  if (b.unit) j["unit"] = b.unit;
  if (b.automaton) j["automaton"] = b.automaton;
  if (b.rank) j["rank"] = b.rank;
  if (b.code != wire::ConfigCode::kNone) j["code"] = to_string(b.code);
  if (!b.endpoint.empty()) j["endpoint"] = b.endpoint;
  if (!b.reply_to.empty()) j["reply_to"] = b.reply_to;
  if (!b.topics.empty()) j["topics"] = b.topics;
  return j;
}

inline Json describe(const wire::AppMessage& m) {
  Json j = Json::object();
  j["seq"] = m.seq;
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, wire::VitalSignBody>) {
          Json r = Json::object();
          for (const auto& rd : b.readings) r[rd.name] = rd.value;
          j["readings"] = r;
        } else if constexpr (std::is_same_v<B, wire::TransitionBody>) {
          j["from"] = b.from_uid;
          j["to"] = b.to_uid;
          j["entered_at_us"] = b.entered_at_us;
        } else if constexpr (std::is_same_v<B, wire::ConfirmationBody>) {
          j["state"] = b.state_uid;
          j["entered_at_us"] = b.entered_at_us;
        } else if constexpr (std::is_same_v<B, wire::CommandBody>) {
          j["command"] = b.command;
          if (b.argument) j["argument"] = b.argument;
        } else {
          j["at_us"] = b.at_us;
          j["note"] = b.note;
        }
      },
      m.body);
  return j;
}

}  // namespace medsync::transport
