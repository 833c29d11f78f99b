#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace depthprune {

inline constexpr std::string_view kHashAlgorithm = "sha256";

/// Incremental SHA-256 producing lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  void update_u64(std::uint64_t value);
  void update_f64(double value);
  /// Same bytes as calling update_f64 on each value in turn.
  void update_f64(std::span<const double> values);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::span<const std::byte> bytes);

}  // namespace depthprune
