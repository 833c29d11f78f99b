#include "depthprune/calibration.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <random>

#include "depthprune/error.hpp"
#include "depthprune/hash.hpp"

namespace depthprune {

void CalibrationSet::validate(std::size_t vocab_size) const {
  if (sequences.empty()) throw DataError("calibration set is empty");
  const std::size_t len = sequences.front().size();
  if (len < 2) throw DataError("calibration rows need at least 2 tokens");
  for (std::size_t r = 0; r < sequences.size(); ++r) {
    if (sequences[r].size() != len) {
      throw DataError("calibration row " + std::to_string(r) + " has length " +
                      std::to_string(sequences[r].size()) + ", expected " + std::to_string(len));
    }
    for (std::size_t t = 0; t < len; ++t) {
      if (sequences[r][t] >= vocab_size) {
        throw DataError("token id " + std::to_string(sequences[r][t]) + " at row " +
                        std::to_string(r) + " position " + std::to_string(t) +
                        " >= vocabulary size " + std::to_string(vocab_size));
      }
    }
  }
}

std::string CalibrationSet::fingerprint() const {
  Sha256 h;
  h.update_u64(sequences.size());
  h.update_u64(seq_len());
  for (const auto& row : sequences) {
    for (auto id : row) h.update_u64(id);
  }
  return h.hex_digest();
}

CalibrationSet CalibrationSet::head(std::size_t count) const {
  CalibrationSet out;
  const std::size_t n = std::min(count, sequences.size());
  out.sequences.assign(sequences.begin(), sequences.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

namespace {

template <typename Get>
CalibrationSet chunk(std::size_t length, std::size_t seq_len, std::size_t max_rows, Get get) {
  if (seq_len < 2) throw DataError("sequence length must be >= 2");
  std::size_t rows = length / seq_len;
  if (max_rows != 0) rows = std::min(rows, max_rows);
  if (rows == 0) {
    throw DataError("input of " + std::to_string(length) + " tokens holds no complete row of " +
                    std::to_string(seq_len));
  }
  CalibrationSet set;
  set.sequences.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::uint32_t> row(seq_len);
    for (std::size_t t = 0; t < seq_len; ++t) row[t] = get(r * seq_len + t);
    set.sequences.push_back(std::move(row));
  }
  return set;
}

}  // namespace

CalibrationSet calibration_from_bytes(std::string_view bytes, std::size_t seq_len,
                                      std::size_t max_rows) {
  return chunk(bytes.size(), seq_len, max_rows, [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i]));
  });
}

CalibrationSet calibration_from_ids(const std::vector<std::uint32_t>& ids, std::size_t seq_len,
                                    std::size_t max_rows) {
  return chunk(ids.size(), seq_len, max_rows, [&](std::size_t i) { return ids[i]; });
}

std::vector<std::uint32_t> parse_id_stream(std::string_view text) {
  std::vector<std::uint32_t> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= text.size()) break;
    std::uint32_t value = 0;
    auto [end, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc() ||
        (end != text.data() + text.size() && !std::isspace(static_cast<unsigned char>(*end)))) {
      throw DataError("malformed token id near byte offset " + std::to_string(pos));
    }
    ids.push_back(value);
    pos = static_cast<std::size_t>(end - text.data());
  }
  return ids;
}

std::string synthetic_corpus(std::uint64_t seed, std::size_t bytes) {
  static constexpr std::array<std::string_view, 48> kWords = {
      "the",    "of",      "and",    "to",     "in",     "a",      "is",     "was",
      "that",   "for",     "on",     "as",     "with",   "by",     "he",     "it",
      "at",     "from",    "his",    "an",     "were",   "are",    "which",  "this",
      "river",  "city",    "season", "album",  "game",   "war",    "church", "station",
      "team",   "first",   "later",  "after",  "during", "between", "north", "played",
      "built",  "released", "known", "named",  "series", "record", "line",   "years"};
  std::mt19937_64 gen(seed);
  std::string out;
  out.reserve(bytes + 16);
  std::size_t words_in_sentence = 0;
  bool capitalize = true;
  while (out.size() < bytes) {
    std::string word(kWords[gen() % kWords.size()]);
    if (capitalize) word[0] = static_cast<char>(word[0] - 'a' + 'A');
    capitalize = false;
    out += word;
    ++words_in_sentence;
    if (words_in_sentence > 4 && gen() % 6 == 0) {
      out += ". ";
      words_in_sentence = 0;
      capitalize = true;
    } else if (gen() % 11 == 0) {
      out += ", ";
    } else {
      out += ' ';
    }
  }
  out.resize(bytes);
  return out;
}

}  // namespace depthprune
