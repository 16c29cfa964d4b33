#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace medsync::wire {

namespace detail {
inline constexpr std::array<std::uint32_t, 256> make_crc_table(std::uint32_t reflected_poly) {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (reflected_poly ^ (c >> 1)) : (c >> 1);
    t[i] = c;
  }
  return t;
}
}  // namespace detail

/// CRC-32 as used for the ISO/IEC 3309 / 13239 frame check sequence and
/// ITU-T V.42: polynomial 0x04C11DB7 processed reflected, all-ones init,
/// all-ones final XOR.
class Crc32 {
 public:
  static constexpr std::uint32_t kReflectedPoly = 0xEDB88320u;
  /// Value of crc32(data || fcs_octets(crc32(data))) for any data.
  static constexpr std::uint32_t kResidue = 0x2144DF1Cu;

  void update(std::span<const std::uint8_t> data) {
    for (std::uint8_t b : data) reg_ = kTable[(reg_ ^ b) & 0xFFu] ^ (reg_ >> 8);
  }
  std::uint32_t value() const { return reg_ ^ 0xFFFFFFFFu; }

 private:
  static constexpr std::array<std::uint32_t, 256> kTable = detail::make_crc_table(0xEDB88320u);

  std::uint32_t reg_ = 0xFFFFFFFFu;
};

inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
  Crc32 c;
  c.update(data);
  return c.value();
}

/// Frame check sequence octets in transmission order (least significant first).
inline std::array<std::uint8_t, 4> fcs_octets(std::uint32_t crc) {
  return {static_cast<std::uint8_t>(crc), static_cast<std::uint8_t>(crc >> 8),
          static_cast<std::uint8_t>(crc >> 16), static_cast<std::uint8_t>(crc >> 24)};
}

}  // namespace medsync::wire
