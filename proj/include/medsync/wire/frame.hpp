#pragma once

#include <cstdint>

#include "medsync/wire/bytes.hpp"
#include "medsync/wire/cipher.hpp"
#include "medsync/wire/crc32.hpp"
#include "medsync/wire/header.hpp"

namespace medsync::wire {

// Largest padded payload that fits the 65000-bit length field, rounded down
// to whole cipher blocks, and the plaintext that pads to it.
inline constexpr std::size_t kMaxPayloadOctets = (kMaxDataLengthBits / 8) / kBlockOctets * kBlockOctets;
inline constexpr std::size_t kMaxPlaintextOctets = kMaxPayloadOctets - 1;
inline constexpr std::size_t kChecksumOctets = 4;

struct OpenedFrame {
  MessageHeader header;
  Bytes plaintext;
};

/// Layout: header(8) | AES-128-ECB(PKCS#7(plaintext)) | optional FCS(4).
/// The FCS covers the encoded header and the ciphertext, so integrity can be
/// checked without the key. `h.data_length_bits` and `h.checksum_flag` are
/// overwritten.
inline Bytes seal_frame(MessageHeader h, ByteView plaintext, const AesKey& key, bool with_checksum) {
  if (plaintext.size() > kMaxPlaintextOctets) {
    throw WireError(WireErrc::kPayloadTooLarge,
                    std::to_string(plaintext.size()) + " octets pads beyond the 65000-bit length limit");
  }
  Bytes payload = aes128_ecb_encrypt(key, plaintext);
  h.data_length_bits = static_cast<std::uint16_t>(payload.size() * 8);
  h.checksum_flag = with_checksum;

  HeaderOctets head = encode_header(h);
  Bytes frame;
  frame.reserve(kHeaderOctets + payload.size() + (with_checksum ? kChecksumOctets : 0));
  frame.insert(frame.end(), head.begin(), head.end());
  frame.insert(frame.end(), payload.begin(), payload.end());
  if (with_checksum) {
    auto fcs = fcs_octets(crc32(frame));
    frame.insert(frame.end(), fcs.begin(), fcs.end());
  }
  return frame;
}

inline std::size_t expected_frame_size(const MessageHeader& h) {
  return kHeaderOctets + h.data_length_bits / 8 + (h.checksum_flag ? kChecksumOctets : 0);
}

/// Decodes and length-checks the header only; no key needed.
inline MessageHeader peek_header(ByteView frame) {
  if (frame.size() < kHeaderOctets) throw WireError(WireErrc::kFraming, "frame shorter than the header");
  MessageHeader h = decode_header(frame.first(kHeaderOctets));
  if (frame.size() != expected_frame_size(h)) {
    throw WireError(WireErrc::kFraming, "frame is " + std::to_string(frame.size()) + " octets, header declares " +
                                            std::to_string(expected_frame_size(h)));
  }
  return h;
}

inline bool verify_checksum(ByteView frame) {
  return crc32(frame) == Crc32::kResidue;
}

inline OpenedFrame open_frame(ByteView frame, const AesKey& key) {
  MessageHeader h = peek_header(frame);
  if (h.checksum_flag && !verify_checksum(frame)) {
    throw WireError(WireErrc::kIntegrity, "CRC-32 mismatch");
  }
  ByteView payload = frame.subspan(kHeaderOctets, h.data_length_bits / 8);
  return OpenedFrame{h, aes128_ecb_decrypt(key, payload)};
}

}  // namespace medsync::wire
