#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "medsync/wire/bytes.hpp"
#include "medsync/wire/message_type.hpp"

namespace medsync::wire {

// ---------------------------------------------------------------------------
// Configuration bodies
// ---------------------------------------------------------------------------

/// Reason / status codes carried in ConfigBody::code.
enum class ConfigCode : std::uint8_t {
  kNone = 0,
  kUnknownUnit = 1,        // unit not in the entity's unit table
  kUnitAlreadyActive = 2,  // a live registrar already holds the unit
  kWrongUnit = 3,          // automaton asked the wrong registrar
  kDuplicateAutomaton = 4,
  kNotRegistered = 5,
  kLinkDown = 6,           // gateway: peer entity unreachable
  kLinkUp = 7,             // gateway: peer entity reachable again
};

/// Topic = (destination unit UID, message type), packed as unit << 8 | type.
using TopicKey = std::uint16_t;

constexpr TopicKey make_topic(std::uint8_t unit, MessageType type) {
  return static_cast<TopicKey>((unit << 8) | static_cast<std::uint8_t>(type));
}

/// One canonical layout for every configuration message:
///
///   unit:u8 automaton:u8 rank:u8 code:u8 endpoint:str8 reply_to:str8
///   topic_count:u16 topic:u16*
///
/// Fields a message does not use are zero / empty.
struct ConfigBody {
  std::uint8_t unit = 0;
  std::uint8_t automaton = 0;
  std::uint8_t rank = 0;
  ConfigCode code = ConfigCode::kNone;
  std::string endpoint;   // subject endpoint (located server, registrar, new automaton)
  std::string reply_to;   // where the sender listens
  std::vector<TopicKey> topics;

  friend bool operator==(const ConfigBody&, const ConfigBody&) = default;
};

inline Bytes encode_config(const ConfigBody& b) {
  ByteWriter w;
  w.u8(b.unit);
  w.u8(b.automaton);
  w.u8(b.rank);
  w.u8(static_cast<std::uint8_t>(b.code));
  w.str8(b.endpoint);
  w.str8(b.reply_to);
  w.u16(static_cast<std::uint16_t>(b.topics.size()));
  for (TopicKey t : b.topics) w.u16(t);
  return w.take();
}

inline ConfigBody decode_config(ByteView in) {
  ByteReader r(in);
  ConfigBody b;
  b.unit = r.u8();
  b.automaton = r.u8();
  b.rank = r.u8();
  b.code = static_cast<ConfigCode>(r.u8());
  b.endpoint = r.str8();
  b.reply_to = r.str8();
  std::uint16_t n = r.u16();
  b.topics.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) b.topics.push_back(r.u16());
  if (!r.done()) throw WireError(WireErrc::kPayload, "trailing octets after configuration body");
  return b;
}

// ---------------------------------------------------------------------------
// Application bodies. Every one starts with the sender's sequence number
// (u32, per source automaton, strictly increasing).
// ---------------------------------------------------------------------------

struct Reading {
  std::string name;
  double value = 0;
  friend bool operator==(const Reading&, const Reading&) = default;
};

/// vital-sign: seq:u32 count:u8 (name:str8 value:f64)*
struct VitalSignBody {
  std::vector<Reading> readings;
  friend bool operator==(const VitalSignBody&, const VitalSignBody&) = default;
};

/// state-transition-event: seq:u32 from:u8 to:u8 entered_at_us:i64
struct TransitionBody {
  std::uint8_t from_uid = 0;
  std::uint8_t to_uid = 0;
  std::int64_t entered_at_us = 0;
  friend bool operator==(const TransitionBody&, const TransitionBody&) = default;
};

/// state-confirmation: seq:u32 state:u8 entered_at_us:i64
struct ConfirmationBody {
  std::uint8_t state_uid = 0;
  std::int64_t entered_at_us = 0;
  friend bool operator==(const ConfirmationBody&, const ConfirmationBody&) = default;
};

/// best-practice-command: seq:u32 command:str8 argument:u8
struct CommandBody {
  std::string command;
  std::uint8_t argument = 0;
  friend bool operator==(const CommandBody&, const CommandBody&) = default;
};

/// time-log: seq:u32 at_us:i64 note:str8
struct TimeLogBody {
  std::int64_t at_us = 0;
  std::string note;
  friend bool operator==(const TimeLogBody&, const TimeLogBody&) = default;
};

using AppBody = std::variant<VitalSignBody, TransitionBody, ConfirmationBody, CommandBody, TimeLogBody>;

struct AppMessage {
  std::uint32_t seq = 0;
  AppBody body;
  friend bool operator==(const AppMessage&, const AppMessage&) = default;
};

inline MessageType type_of(const AppBody& body) {
  struct Visitor {
    MessageType operator()(const VitalSignBody&) const { return MessageType::kVitalSign; }
    MessageType operator()(const TransitionBody&) const { return MessageType::kStateTransitionEvent; }
    MessageType operator()(const ConfirmationBody&) const { return MessageType::kStateConfirmation; }
    MessageType operator()(const CommandBody&) const { return MessageType::kBestPracticeCommand; }
    MessageType operator()(const TimeLogBody&) const { return MessageType::kTimeLog; }
  };
  return std::visit(Visitor{}, body);
}

inline Bytes encode_app(const AppMessage& m) {
  ByteWriter w;
  w.u32(m.seq);
  struct Visitor {
    ByteWriter& w;
    void operator()(const VitalSignBody& b) const {
      if (b.readings.size() > 255) throw WireError(WireErrc::kEncodingDomain, "more than 255 readings");
      w.u8(static_cast<std::uint8_t>(b.readings.size()));
      for (const auto& r : b.readings) {
        w.str8(r.name);
        w.f64(r.value);
      }
    }
    void operator()(const TransitionBody& b) const {
      w.u8(b.from_uid);
      w.u8(b.to_uid);
      w.i64(b.entered_at_us);
    }
    void operator()(const ConfirmationBody& b) const {
      w.u8(b.state_uid);
      w.i64(b.entered_at_us);
    }
    void operator()(const CommandBody& b) const {
      w.str8(b.command);
      w.u8(b.argument);
    }
    void operator()(const TimeLogBody& b) const {
      w.i64(b.at_us);
      w.str8(b.note);
    }
  };
  std::visit(Visitor{w}, m.body);
  return w.take();
}

inline AppMessage decode_app(MessageType type, ByteView in) {
  ByteReader r(in);
  AppMessage m;
  m.seq = r.u32();
  switch (type) {
    case MessageType::kVitalSign: {
      VitalSignBody b;
      std::uint8_t n = r.u8();
      for (std::uint8_t i = 0; i < n; ++i) {
        Reading rd;
        rd.name = r.str8();
        rd.value = r.f64();
        b.readings.push_back(std::move(rd));
      }
      m.body = std::move(b);
      break;
    }
    case MessageType::kStateTransitionEvent: {
      TransitionBody b;
      b.from_uid = r.u8();
      b.to_uid = r.u8();
      b.entered_at_us = r.i64();
      m.body = b;
      break;
    }
    case MessageType::kStateConfirmation: {
      ConfirmationBody b;
      b.state_uid = r.u8();
      b.entered_at_us = r.i64();
      m.body = b;
      break;
    }
    case MessageType::kBestPracticeCommand: {
      CommandBody b;
      b.command = r.str8();
      b.argument = r.u8();
      m.body = std::move(b);
      break;
    }
    case MessageType::kTimeLog: {
      TimeLogBody b;
      b.at_us = r.i64();
      b.note = r.str8();
      m.body = std::move(b);
      break;
    }
    default:
      throw WireError(WireErrc::kPayload, std::string("not an application message type: ") + std::string(name_of(type)));
  }
  if (!r.done()) throw WireError(WireErrc::kPayload, "trailing octets after application body");
  return m;
}

}  // namespace medsync::wire
