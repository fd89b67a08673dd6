// include/fpg/text/vocab.hpp
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpg::text {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

// Splits on whitespace; every ASCII punctuation character becomes its own
// token. Case is preserved. The literal "<unk>" survives as one token so that
// decoded text re-encodes to the same ids.
std::vector<std::string> split_words(std::string_view text);

// split_words followed by ASCII lowercasing.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view s);

class Vocab {
 public:
  // Only the reserved tokens.
  Vocab();

  // Tokens with frequency >= min_freq ordered by (frequency desc, token asc),
  // truncated to max_size - 4 entries after the reserved ids.
  static Vocab build(std::span<const std::string> texts, std::size_t min_freq, std::size_t max_size);

  // One surface form per line; line i holds id i + 4.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  // kUnk for unknown tokens.
  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  // Most frequent original casing seen while building.
  const std::string& surface(TokenId id) const;

  bool operator==(const Vocab& other) const { return surfaces_ == other.surfaces_; }

 private:
  void append(std::string surface);

  std::vector<std::string> tokens_;
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
};

// Fixed-length id sequence; ids[true_length..] are all kPad.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::size_t true_length = 0;

  std::span<const TokenId> tokens() const { return {ids.data(), true_length}; }
  bool operator==(const TokenSeq&) const = default;
};

// Lowercases, tokenizes, maps OOV to kUnk, truncates to max_len (keeping one
// slot for kEos when add_eos) and pads with kPad.
TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len, bool add_eos);

// Space-joined tokens; kPad/kBos/kEos are dropped. Throws on ids outside the vocabulary.
std::string decode(std::span<const TokenId> ids, const Vocab& vocab);
std::string decode(const TokenSeq& seq, const Vocab& vocab);
// Same as decode but with the recorded surface casing.
std::string decode_display(std::span<const TokenId> ids, const Vocab& vocab);

}  // namespace fpg::text
