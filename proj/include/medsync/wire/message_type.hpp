#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace medsync::wire {

enum class MessageKind { kReserved, kConfiguration, kApplicationData };

/// Fixed 6-bit message type registry. Codes 1-16 are configuration
/// messages, 17-21 application data. Everything else is unassigned.
enum class MessageType : std::uint8_t {
  kReserved = 0,
  kHeartbeat = 1,
  kAnnounceRegistrar = 2,
  kRegistrarNoted = 3,
  kRejection = 4,
  kUnitSpec = 5,
  kRegistrarQuery = 6,
  kRegistrarUnknown = 7,
  kAutomatonRegistration = 8,
  kYouAreIn = 9,
  kIAmStarting = 10,
  kIAmHere = 11,
  kYouAreDead = 12,
  kIAmStopping = 13,
  kIAmRunning = 14,
  kConfigServerLocated = 15,
  kConfigServerQuery = 16,
  kVitalSign = 17,
  kStateTransitionEvent = 18,
  kStateConfirmation = 19,
  kBestPracticeCommand = 20,
  kTimeLog = 21,
};

inline constexpr std::uint8_t kMessageTypeLimit = 64;
inline constexpr std::uint8_t kLastAssignedType = 21;

namespace detail {
inline constexpr std::array<std::string_view, kLastAssignedType + 1> kTypeNames = {
    "reserved",
    "heartbeat",
    "announce-registrar",
    "registrar-noted",
    "rejection",
    "unit-spec",
    "registrar-query",
    "registrar-unknown",
    "automaton-registration",
    "you-are-in",
    "I-am-starting",
    "I-am-here",
    "you-are-dead",
    "I-am-stopping",
    "I-am-running",
    "configuration-server-located",
    "config-server-query",
    "vital-sign",
    "state-transition-event",
    "state-confirmation",
    "best-practice-command",
    "time-log",
};
}  // namespace detail

constexpr bool is_assigned(std::uint8_t code) { return code >= 1 && code <= kLastAssignedType; }

constexpr MessageKind kind_of(MessageType t) {
  auto code = static_cast<std::uint8_t>(t);
  if (code >= 1 && code <= 16) return MessageKind::kConfiguration;
  if (code >= 17 && code <= kLastAssignedType) return MessageKind::kApplicationData;
  return MessageKind::kReserved;
}

constexpr std::string_view name_of(MessageType t) {
  auto code = static_cast<std::uint8_t>(t);
  if (code <= kLastAssignedType) return detail::kTypeNames[code];
  return "unassigned";
}

constexpr std::optional<MessageType> message_type_from_name(std::string_view name) {
  for (std::uint8_t code = 1; code <= kLastAssignedType; ++code) {
    if (detail::kTypeNames[code] == name) return static_cast<MessageType>(code);
  }
  return std::nullopt;
}

}  // namespace medsync::wire
