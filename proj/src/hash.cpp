#include "depthprune/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <stdexcept>

namespace depthprune {

namespace {

EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(as_ctx(ctx_), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 initialisation failed");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(as_ctx(ctx_)); }

void Sha256::update(std::span<const std::byte> bytes) {
  EVP_DigestUpdate(as_ctx(ctx_), bytes.data(), bytes.size());
}

void Sha256::update(std::string_view text) {
  EVP_DigestUpdate(as_ctx(ctx_), text.data(), text.size());
}

void Sha256::update_u64(std::uint64_t value) {
  std::array<std::byte, 8> buf{};
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::byte>((value >> (8 * i)) & 0xffu);
  update(buf);
}

void Sha256::update_f64(double value) { update_u64(std::bit_cast<std::uint64_t>(value)); }

void Sha256::update_f64(std::span<const double> values) {
  std::array<std::byte, 8 * 512> buf{};
  std::size_t used = 0;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf[used++] = static_cast<std::byte>((bits >> (8 * i)) & 0xffu);
    if (used == buf.size()) {
      update(buf);
      used = 0;
    }
  }
  update(std::span<const std::byte>(buf.data(), used));
}

std::string Sha256::hex_digest() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(as_ctx(ctx_), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::span<const std::byte> bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex_digest();
}

}  // namespace depthprune
