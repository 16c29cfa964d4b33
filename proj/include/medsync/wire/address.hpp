#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace medsync::wire {

/// Hierarchical (entity, unit, automaton) address. Each field is a 5-bit UID;
/// 0 means "every member of the enclosing scope".
struct Address {
  std::uint8_t entity = 0;
  std::uint8_t unit = 0;
  std::uint8_t automaton = 0;

  static constexpr std::uint8_t kFieldLimit = 32;
  static constexpr std::uint8_t kBroadcast = 0;
  /// Unit/automaton UID reserved for the local operator console and sensors.
  static constexpr std::uint8_t kOperator = 31;

  constexpr bool valid() const {
    return entity < kFieldLimit && unit < kFieldLimit && automaton < kFieldLimit;
  }
  constexpr bool is_operator() const { return unit == kOperator && automaton == kOperator; }

  static constexpr Address config_server(std::uint8_t entity) { return {entity, 0, 0}; }
  static constexpr Address registrar(std::uint8_t entity, std::uint8_t unit) { return {entity, unit, 0}; }
  static constexpr Address operator_console(std::uint8_t entity) { return {entity, kOperator, kOperator}; }

  friend constexpr auto operator<=>(const Address&, const Address&) = default;
};

inline std::string to_string(const Address& a) {
  return std::to_string(a.entity) + "." + std::to_string(a.unit) + "." + std::to_string(a.automaton);
}

}  // namespace medsync::wire
