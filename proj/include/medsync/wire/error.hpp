#pragma once

#include <stdexcept>
#include <string>

namespace medsync::wire {

enum class WireErrc {
  kEncodingDomain,   // a header field does not fit its bit width
  kMalformedHeader,  // decoded header violates an invariant
  kPayloadTooLarge,
  kIntegrity,        // CRC-32 trailer mismatch
  kDecryption,       // bad padding after decryption
  kFraming,          // truncated or inconsistent frame length
  kPayload,          // message body does not parse
};

inline const char* to_string(WireErrc code) {
  switch (code) {
    case WireErrc::kEncodingDomain: return "encoding-domain";
    case WireErrc::kMalformedHeader: return "malformed-header";
    case WireErrc::kPayloadTooLarge: return "payload-too-large";
    case WireErrc::kIntegrity: return "integrity";
    case WireErrc::kDecryption: return "decryption";
    case WireErrc::kFraming: return "framing";
    case WireErrc::kPayload: return "payload";
  }
  return "unknown";
}

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

}  // namespace medsync::wire
