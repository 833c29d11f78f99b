#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace depthprune {

/// Equal-length token-id rows used for boundary capture and perplexity.
/// Byte-level by default: token id == byte value, vocabulary 256.
struct CalibrationSet {
  std::vector<std::vector<std::uint32_t>> sequences;

  std::size_t size() const noexcept { return sequences.size(); }
  std::size_t seq_len() const noexcept { return sequences.empty() ? 0 : sequences.front().size(); }

  /// Throws DataError unless non-empty, rectangular, length >= 2 and every
  /// id < vocab_size.
  void validate(std::size_t vocab_size) const;

  /// SHA-256 over the row count, row length and ids.
  std::string fingerprint() const;

  /// First `count` rows (or all of them if fewer).
  CalibrationSet head(std::size_t count) const;

  bool operator==(const CalibrationSet&) const = default;
};

/// Splits bytes into consecutive non-overlapping rows of `seq_len` tokens.
/// `max_rows == 0` takes every complete row. Throws DataError if no complete
/// row fits.
CalibrationSet calibration_from_bytes(std::string_view bytes, std::size_t seq_len,
                                      std::size_t max_rows = 0);

/// Same chunking over an externally tokenized id stream.
CalibrationSet calibration_from_ids(const std::vector<std::uint32_t>& ids, std::size_t seq_len,
                                    std::size_t max_rows = 0);

/// Parses whitespace-separated non-negative integers.
std::vector<std::uint32_t> parse_id_stream(std::string_view text);

/// Deterministic pseudo-English text built from a fixed word list.
std::string synthetic_corpus(std::uint64_t seed, std::size_t bytes);

}  // namespace depthprune
