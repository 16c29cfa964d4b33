#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "medsync/wire/address.hpp"
#include "medsync/wire/error.hpp"
#include "medsync/wire/message_type.hpp"

namespace medsync::wire {

inline constexpr std::size_t kHeaderOctets = 8;
inline constexpr std::uint16_t kMaxDataLengthBits = 65000;
inline constexpr std::uint8_t kMaxPriority = 7;

/// The 64-bit protocol prefix. Field order and widths on the wire:
///
///   type:6 | priority:3 | checksum_flag:1 | safe_state:8 |
///   src entity:5 | src unit:5 | src automaton:5 |
///   dst entity:5 | dst unit:5 | dst automaton:5 | data_length_bits:16
///
/// packed MSB-first and emitted as big-endian octets.
struct MessageHeader {
  MessageType type = MessageType::kReserved;
  std::uint8_t priority = 0;
  bool checksum_flag = false;
  std::uint8_t open_loop_safe_state = 0;
  Address source;
  Address destination;
  std::uint16_t data_length_bits = 0;

  friend bool operator==(const MessageHeader&, const MessageHeader&) = default;
};

using HeaderOctets = std::array<std::uint8_t, kHeaderOctets>;

namespace detail {

struct BitPacker {
  std::uint64_t word = 0;
  int used = 0;

  void put(std::uint64_t value, int width, const char* field) {
    if (value >> width) {
      throw WireError(WireErrc::kEncodingDomain, std::string(field) + " exceeds " + std::to_string(width) + " bits");
    }
    word = (word << width) | value;
    used += width;
  }
};

struct BitUnpacker {
  std::uint64_t word;
  int left = 64;

  std::uint64_t take(int width) {
    left -= width;
    return (word >> left) & ((std::uint64_t{1} << width) - 1);
  }
};

}  // namespace detail

inline HeaderOctets encode_header(const MessageHeader& h) {
  detail::BitPacker p;
  p.put(static_cast<std::uint8_t>(h.type), 6, "message type");
  p.put(h.priority, 3, "priority");
  p.put(h.checksum_flag ? 1 : 0, 1, "checksum flag");
  p.put(h.open_loop_safe_state, 8, "open-loop safe state");
  p.put(h.source.entity, 5, "source entity");
  p.put(h.source.unit, 5, "source unit");
  p.put(h.source.automaton, 5, "source automaton");
  p.put(h.destination.entity, 5, "destination entity");
  p.put(h.destination.unit, 5, "destination unit");
  p.put(h.destination.automaton, 5, "destination automaton");
  if (h.data_length_bits > kMaxDataLengthBits) {
    throw WireError(WireErrc::kEncodingDomain, "data length exceeds 65000 bits");
  }
  if (h.data_length_bits % 8 != 0) {
    throw WireError(WireErrc::kEncodingDomain, "data length is not a whole number of octets");
  }
  p.put(h.data_length_bits, 16, "data length");

  HeaderOctets out{};
  for (std::size_t i = 0; i < kHeaderOctets; ++i) {
    out[i] = static_cast<std::uint8_t>(p.word >> (56 - 8 * i));
  }
  return out;
}

inline MessageHeader decode_header(std::span<const std::uint8_t> octets) {
  if (octets.size() < kHeaderOctets) throw WireError(WireErrc::kFraming, "header needs 8 octets");
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < kHeaderOctets; ++i) word = (word << 8) | octets[i];

  detail::BitUnpacker u{word};
  MessageHeader h;
  h.type = static_cast<MessageType>(u.take(6));
  h.priority = static_cast<std::uint8_t>(u.take(3));
  h.checksum_flag = u.take(1) != 0;
  h.open_loop_safe_state = static_cast<std::uint8_t>(u.take(8));
  h.source.entity = static_cast<std::uint8_t>(u.take(5));
  h.source.unit = static_cast<std::uint8_t>(u.take(5));
  h.source.automaton = static_cast<std::uint8_t>(u.take(5));
  h.destination.entity = static_cast<std::uint8_t>(u.take(5));
  h.destination.unit = static_cast<std::uint8_t>(u.take(5));
  h.destination.automaton = static_cast<std::uint8_t>(u.take(5));
  h.data_length_bits = static_cast<std::uint16_t>(u.take(16));

  if (h.data_length_bits > kMaxDataLengthBits) {
    throw WireError(WireErrc::kMalformedHeader, "data length " + std::to_string(h.data_length_bits) + " exceeds 65000 bits");
  }
  if (h.data_length_bits % 8 != 0) {
    throw WireError(WireErrc::kMalformedHeader, "data length is not a whole number of octets");
  }
  return h;
}

}  // namespace medsync::wire
