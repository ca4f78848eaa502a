#include "memetrn/text/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "memetrn/errors.hpp"

namespace memetrn::text {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[BOS]", "[EOS]"};
  return kReserved;
}

Vocab::Vocab() {
  for (const auto& t : reserved_tokens()) add(t);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw ParseError("vocab must start with the reserved tokens [PAD] [UNK] [CLS] [SEP] [BOS] [EOS]");
  }
  Vocab v;
  for (std::size_t i = reserved.size(); i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw ParseError("vocab line " + std::to_string(i + 1) + ": empty token");
    if (v.contains(tokens[i])) {
      throw IntegrityError("vocab line " + std::to_string(i + 1) + ": duplicate token '" + tokens[i] + "'");
    }
    v.add(tokens[i]);
  }
  return v;
}

std::size_t Vocab::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<std::size_t> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw IndexError("vocab id " + std::to_string(id) + " out of range for vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab Vocab::parse(std::string_view content) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < content.size()) {
    const std::size_t nl = content.find('\n', start);
    if (nl == std::string_view::npos) {
      tokens.emplace_back(content.substr(start));
      break;
    }
    tokens.emplace_back(content.substr(start, nl - start));
    start = nl + 1;
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write vocab " + path.string());
  out << serialize();
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open vocab " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return words;
}

std::string normalize(std::string_view text) {
  std::string out;
  for (const auto& w : normalize_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t target_size) {
  if (corpus.empty()) throw InputError("build_vocab: empty corpus");

  std::map<std::string, std::size_t> word_freq;
  std::set<char> chars;
  for (const auto& line : corpus) {
    for (auto& w : normalize_words(line)) {
      chars.insert(w.begin(), w.end());
      ++word_freq[w];
    }
  }
  if (target_size <= kReservedCount + chars.size()) {
    throw InputError("build_vocab: target size " + std::to_string(target_size) +
                     " must exceed reserved tokens plus " + std::to_string(chars.size()) + " distinct characters");
  }

  Vocab vocab;
  for (char c : chars) vocab.add(std::string(1, c));
  for (char c : chars) vocab.add(std::string(kContinuation) + c);

  struct Word {
    std::vector<std::string> pieces;
    std::size_t freq;
  };
  std::vector<Word> words;
  for (const auto& [w, f] : word_freq) {
    Word word{{}, f};
    for (std::size_t i = 0; i < w.size(); ++i) {
      word.pieces.push_back(i == 0 ? std::string(1, w[i]) : std::string(kContinuation) + w[i]);
    }
    words.push_back(std::move(word));
  }

  auto strip = [](const std::string& piece) {
    return piece.starts_with(kContinuation) ? piece.substr(kContinuation.size()) : piece;
  };

  while (vocab.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_freq;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.pieces.size(); ++i) pair_freq[{w.pieces[i], w.pieces[i + 1]}] += w.freq;
    }
    if (pair_freq.empty()) break;
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    auto best = pair_freq.begin();
    for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + strip(right);
    vocab.add(merged);
    for (auto& w : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < w.pieces.size(); ++i) {
        if (i + 1 < w.pieces.size() && w.pieces[i] == left && w.pieces[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.pieces[i]);
        }
      }
      w.pieces = std::move(next);
    }
  }
  return vocab;
}

TokenizedText wordpiece_tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  TokenizedText out;
  out.text = std::string(text);
  for (const auto& word : normalize_words(text)) {
    std::vector<std::size_t> pieces;
    std::size_t start = 0;
    bool unknown = false;
    while (start < word.size()) {
      std::optional<std::size_t> match;
      std::size_t end = word.size();
      for (; end > start; --end) {
        std::string candidate = word.substr(start, end - start);
        if (start > 0) candidate.insert(0, kContinuation);
        if ((match = vocab.find(candidate))) break;
      }
      if (!match) {
        unknown = true;
        break;
      }
      pieces.push_back(*match);
      start = end;
    }
    if (unknown) pieces.assign(1, kUnkId);
    if (out.ids.size() + pieces.size() > max_len) {
      // Keep the pieces that still fit; the cut word gets no span.
      const std::size_t room = max_len - out.ids.size();
      out.ids.insert(out.ids.end(), pieces.begin(), pieces.begin() + static_cast<std::ptrdiff_t>(room));
      break;
    }
    const std::size_t begin = out.ids.size();
    out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
    out.word_spans.emplace_back(begin, out.ids.size());
  }
  return out;
}

std::string detokenize(std::span<const std::size_t> ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t id : ids) {
    const std::string& tok = vocab.token(id);
    if (tok.starts_with(kContinuation) && !out.empty()) {
      out += tok.substr(kContinuation.size());
    } else {
      if (!out.empty()) out += ' ';
      out += tok;
    }
  }
  return out;
}

}  // namespace memetrn::text
