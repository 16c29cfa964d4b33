#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include "medsync/wire/frame.hpp"
#include "medsync/wire/payload.hpp"

namespace medsync::wire {

namespace detail {

inline std::string hex_octets(ByteView b, std::size_t limit = 64) {
  std::string s;
  char buf[4];
  for (std::size_t i = 0; i < b.size() && i < limit; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", b[i]);
    if (i) s.push_back(' ');
    s += buf;
  }
  if (b.size() > limit) s += " ...";
  return s;
}

inline std::string describe_body(MessageType type, ByteView plain) {
  std::ostringstream os;
  if (kind_of(type) == MessageKind::kConfiguration) {
    ConfigBody c = decode_config(plain);
    os << "unit=" << int(c.unit) << " automaton=" << int(c.automaton) << " rank=" << int(c.rank)
       << " code=" << int(static_cast<std::uint8_t>(c.code)) << " endpoint=\"" << c.endpoint << "\" reply_to=\""
       << c.reply_to << "\"";
    if (!c.topics.empty()) {
      os << " topics=[";
      for (std::size_t i = 0; i < c.topics.size(); ++i) {
        os << (i ? "," : "") << (c.topics[i] >> 8) << ":" << name_of(static_cast<MessageType>(c.topics[i] & 0xFF));
      }
      os << "]";
    }
    return os.str();
  }
  AppMessage m = decode_app(type, plain);
  os << "seq=" << m.seq;
  if (auto* v = std::get_if<VitalSignBody>(&m.body)) {
    for (const auto& r : v->readings) os << " " << r.name << "=" << r.value;
  } else if (auto* t = std::get_if<TransitionBody>(&m.body)) {
    os << " from=" << int(t->from_uid) << " to=" << int(t->to_uid) << " entered_at_us=" << t->entered_at_us;
  } else if (auto* c = std::get_if<ConfirmationBody>(&m.body)) {
    os << " state=" << int(c->state_uid) << " entered_at_us=" << c->entered_at_us;
  } else if (auto* cmd = std::get_if<CommandBody>(&m.body)) {
    os << " command=\"" << cmd->command << "\" argument=" << int(cmd->argument);
  } else if (auto* log = std::get_if<TimeLogBody>(&m.body)) {
    os << " at_us=" << log->at_us << " note=\"" << log->note << "\"";
  }
  return os.str();
}

}  // namespace detail

/// Annotated text rendering of one frame. With a key the payload is opened
/// and the body decoded; without one only the cleartext parts are shown.
inline std::string dump_frame(ByteView frame, const std::optional<AesKey>& key = std::nullopt) {
  std::ostringstream os;
  os << "frame " << frame.size() << " octets\n";
  if (frame.size() < kHeaderOctets) {
    os << "  error: shorter than the 8-octet header\n";
    return os.str();
  }
  os << "  header      " << detail::hex_octets(frame.first(kHeaderOctets)) << "\n";
  MessageHeader h;
  try {
    h = decode_header(frame.first(kHeaderOctets));
  } catch (const WireError& e) {
    os << "  error: " << e.what() << "\n";
    return os.str();
  }
  os << "  type        " << int(static_cast<std::uint8_t>(h.type)) << " (" << name_of(h.type) << ")\n"
     << "  priority    " << int(h.priority) << "\n"
     << "  checksum    " << (h.checksum_flag ? 1 : 0) << "\n"
     << "  safe_state  " << int(h.open_loop_safe_state) << "\n"
     << "  source      " << to_string(h.source) << "\n"
     << "  destination " << to_string(h.destination) << "\n"
     << "  length      " << h.data_length_bits << " bits (" << h.data_length_bits / 8 << " octets)\n";

  if (frame.size() != expected_frame_size(h)) {
    os << "  error: frame length does not match header (expected " << expected_frame_size(h) << ")\n";
    return os.str();
  }
  ByteView payload = frame.subspan(kHeaderOctets, h.data_length_bits / 8);
  os << "  payload     " << detail::hex_octets(payload) << "\n";
  if (h.checksum_flag) {
    ByteView fcs = frame.last(kChecksumOctets);
    os << "  fcs         " << detail::hex_octets(fcs) << (verify_checksum(frame) ? " (ok)" : " (MISMATCH)") << "\n";
  }
  if (key) {
    try {
      OpenedFrame opened = open_frame(frame, *key);
      os << "  plaintext   " << detail::hex_octets(opened.plaintext) << "\n";
      os << "  body        " << detail::describe_body(h.type, opened.plaintext) << "\n";
    } catch (const WireError& e) {
      os << "  error: " << e.what() << "\n";
    }
  }
  return os.str();
}

}  // namespace medsync::wire
