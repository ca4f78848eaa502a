#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace memetrn::text {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kSepId = 3;
inline constexpr std::size_t kBosId = 4;
inline constexpr std::size_t kEosId = 5;
inline constexpr std::size_t kReservedCount = 6;

inline constexpr std::string_view kContinuation = "##";

const std::vector<std::string>& reserved_tokens();

// Bijective token <-> id table. Ids 0..5 are always
// [PAD] [UNK] [CLS] [SEP] [BOS] [EOS].
class Vocab {
 public:
  Vocab();

  // Validates reserved prefix and uniqueness.
  static Vocab from_tokens(std::vector<std::string> tokens);

  // Returns the id of `token`, appending it if new.
  std::size_t add(const std::string& token);
  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  const std::string& token(std::size_t id) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, line number = id, "\n" terminated.
  std::string serialize() const;
  static Vocab parse(std::string_view content);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Lowercases, splits on whitespace, and isolates ASCII punctuation as
// separate words.
std::vector<std::string> normalize_words(std::string_view text);
std::string normalize(std::string_view text);

// Frequency-driven merge training. Every character seen in the corpus gets
// both a word-initial and a "##" continuation entry, so tokenisation of
// corpus text never needs [UNK]. Merges then add the most frequent adjacent
// piece pair (ties broken lexicographically) until target_size is reached or
// no pair remains.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t target_size);

struct TokenizedText {
  std::vector<std::size_t> ids;
  std::string text;
  // Per normalised word: [begin, end) into ids. Words cut by truncation are
  // dropped entirely from the map.
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
};

// Greedy longest-match-first WordPiece. A word becomes a single [UNK] if any
// remainder has no vocabulary match. Output is truncated to max_len ids.
TokenizedText wordpiece_tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);

// Joins pieces; "##" pieces attach to the previous piece, others are
// space-separated.
std::string detokenize(std::span<const std::size_t> ids, const Vocab& vocab);

}  // namespace memetrn::text
