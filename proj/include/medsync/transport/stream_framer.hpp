#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "medsync/wire/bytes.hpp"
#include "medsync/wire/error.hpp"

namespace medsync::transport {

/// Length-prefixed framing for persistent stream links: u32 big-endian
/// octet count, then the sealed frame.
inline constexpr std::size_t kMaxStreamFrame = 1u << 16;

inline wire::Bytes stream_encode(wire::ByteView frame) {
  if (frame.size() > kMaxStreamFrame) throw wire::WireError(wire::WireErrc::kFraming, "frame too large for stream link");
  wire::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(frame.size()));
  w.raw(frame);
  return w.take();
}

/// Incremental decoder; feed arbitrary chunks, pull whole frames.
class StreamFramer {
 public:
  void feed(wire::ByteView chunk) { buf_.insert(buf_.end(), chunk.begin(), chunk.end()); }

  std::optional<wire::Bytes> next() {
    if (buf_.size() < 4) return std::nullopt;
    std::uint32_t n = (std::uint32_t{buf_[0]} << 24) | (std::uint32_t{buf_[1]} << 16) | (std::uint32_t{buf_[2]} << 8) |
                      std::uint32_t{buf_[3]};
    if (n > kMaxStreamFrame) throw wire::WireError(wire::WireErrc::kFraming, "stream length prefix out of range");
    if (buf_.size() < 4 + n) return std::nullopt;
    wire::Bytes out(buf_.begin() + 4, buf_.begin() + 4 + n);
    buf_.erase(buf_.begin(), buf_.begin() + 4 + n);
    return out;
  }

  std::size_t buffered() const { return buf_.size(); }

 private:
  std::deque<std::uint8_t> buf_;
};

}  // namespace medsync::transport
