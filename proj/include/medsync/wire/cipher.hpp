#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "medsync/wire/bytes.hpp"
#include "medsync/wire/error.hpp"

namespace medsync::wire {

inline constexpr std::size_t kBlockOctets = 16;

/// Static pre-shared 128-bit key. ECB with a fixed key leaks equal-block
/// patterns; this is the framing the protocol mandates, not a recommendation.
struct AesKey {
  std::array<std::uint8_t, 16> octets{};

  static AesKey from_hex(std::string_view hex) {
    if (hex.size() != 32) throw std::invalid_argument("AES-128 key must be 32 hex digits");
    AesKey k;
    auto nibble = [](char c) -> std::uint8_t {
      if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
      if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
      if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
      throw std::invalid_argument("AES-128 key has a non-hex digit");
    };
    for (std::size_t i = 0; i < 16; ++i) {
      k.octets[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return k;
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    for (auto b : octets) {
      s.push_back(kDigits[b >> 4]);
      s.push_back(kDigits[b & 0xF]);
    }
    return s;
  }

  friend bool operator==(const AesKey&, const AesKey&) = default;
};

namespace detail {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

// Raw ECB over whole blocks; padding is handled by the callers.
inline Bytes ecb_blocks(const AesKey& key, ByteView in, bool encrypt) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  if (EVP_CipherInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.octets.data(), nullptr, encrypt ? 1 : 0) != 1) {
    throw std::runtime_error("AES-128-ECB init failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  Bytes out(in.size() + kBlockOctets);
  int n = 0;
  if (!in.empty() && EVP_CipherUpdate(ctx.get(), out.data(), &n, in.data(), static_cast<int>(in.size())) != 1) {
    throw std::runtime_error("AES-128-ECB update failed");
  }
  int tail = 0;
  if (EVP_CipherFinal_ex(ctx.get(), out.data() + n, &tail) != 1) {
    throw std::runtime_error("AES-128-ECB final failed");
  }
  out.resize(static_cast<std::size_t>(n + tail));
  return out;
}

}  // namespace detail

/// PKCS#7 padding to 16-octet blocks. Always adds 1..16 octets.
inline Bytes pkcs7_pad(ByteView plain) {
  Bytes out(plain.begin(), plain.end());
  auto pad = static_cast<std::uint8_t>(kBlockOctets - plain.size() % kBlockOctets);
  out.insert(out.end(), pad, pad);
  return out;
}

inline Bytes pkcs7_unpad(Bytes padded) {
  if (padded.empty() || padded.size() % kBlockOctets != 0) {
    throw WireError(WireErrc::kDecryption, "ciphertext is not a whole number of blocks");
  }
  std::uint8_t pad = padded.back();
  if (pad == 0 || pad > kBlockOctets) throw WireError(WireErrc::kDecryption, "bad padding length");
  for (std::size_t i = padded.size() - pad; i < padded.size(); ++i) {
    if (padded[i] != pad) throw WireError(WireErrc::kDecryption, "bad padding octets");
  }
  padded.resize(padded.size() - pad);
  return padded;
}

inline std::size_t padded_size(std::size_t plain_octets) {
  return (plain_octets / kBlockOctets + 1) * kBlockOctets;
}

inline Bytes aes128_ecb_encrypt(const AesKey& key, ByteView plain) {
  return detail::ecb_blocks(key, pkcs7_pad(plain), true);
}

inline Bytes aes128_ecb_decrypt(const AesKey& key, ByteView cipher) {
  if (cipher.empty() || cipher.size() % kBlockOctets != 0) {
    throw WireError(WireErrc::kDecryption, "ciphertext is not a whole number of blocks");
  }
  return pkcs7_unpad(detail::ecb_blocks(key, cipher, false));
}

/// Single-block primitive, exposed for known-answer tests.
inline std::array<std::uint8_t, 16> aes128_encrypt_block(const AesKey& key, const std::array<std::uint8_t, 16>& block) {
  Bytes out = detail::ecb_blocks(key, block, true);
  std::array<std::uint8_t, 16> r{};
  std::copy(out.begin(), out.end(), r.begin());
  return r;
}

}  // namespace medsync::wire
