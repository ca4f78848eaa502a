#include "memetrn/text/paraphrase.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/rng.hpp"

namespace memetrn::text {
namespace {

std::vector<std::string> split_clauses(const std::string& text) {
  std::vector<std::string> clauses;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      clauses.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  clauses.push_back(cur);
  for (auto& c : clauses) {
    const auto b = c.find_first_not_of(' ');
    const auto e = c.find_last_not_of(' ');
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  std::erase_if(clauses, [](const std::string& c) { return c.empty(); });
  return clauses;
}

std::vector<std::string> split_words(const std::string& clause) {
  std::istringstream in(clause);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

bool valid_diversity(int k) { return k == 2 || k == 5 || k == 10; }

ParaphraseResult paraphrase_augment(const MemeSample& sample, const ParaphraseConfig& cfg) {
  if (!valid_diversity(cfg.diversity)) {
    throw InputError("paraphrase diversity must be 2, 5 or 10, got " + std::to_string(cfg.diversity));
  }
  for (const auto& [word, alternatives] : cfg.lexicon) {
    for (const auto& alt : alternatives) {
      if (cfg.protected_words.count(alt)) {
        throw InputError("paraphrase lexicon maps '" + word + "' to protected word '" + alt + "'");
      }
    }
  }

  ParaphraseResult result;
  if (split_words(sample.text).empty()) {
    result.variants.push_back(sample);
    result.warning = true;
    result.message = "empty text; returned unchanged";
    return result;
  }

  const bool substitute = cfg.mode != ParaphraseMode::ClauseReorder;
  const bool reorder = cfg.mode != ParaphraseMode::SynonymSubstitution;
  Rng rng(cfg.seed, Rng::hash(sample.id));
  const auto clauses = split_clauses(sample.text);
  const std::string original = join(clauses, ", ");

  std::set<std::string> seen{original, sample.text};
  std::vector<std::string> texts;
  const int attempts = 25 * cfg.diversity;
  for (int a = 0; a < attempts && static_cast<int>(texts.size()) < cfg.diversity; ++a) {
    std::vector<std::vector<std::string>> rewritten;
    for (const auto& clause : clauses) {
      auto words = split_words(clause);
      if (substitute) {
        for (auto& w : words) {
          const std::string key = lower(w);
          if (cfg.protected_words.count(key)) continue;
          auto it = cfg.lexicon.find(key);
          if (it == cfg.lexicon.end() || it->second.empty()) continue;
          if (rng.bernoulli(cfg.substitution_rate)) w = it->second[rng.below(it->second.size())];
        }
      }
      rewritten.push_back(std::move(words));
    }
    if (reorder && rewritten.size() > 1) {
      for (std::size_t i = rewritten.size() - 1; i > 0; --i) std::swap(rewritten[i], rewritten[rng.below(i + 1)]);
    }
    std::vector<std::string> clause_text;
    for (const auto& words : rewritten) clause_text.push_back(join(words, " "));
    std::string candidate = join(clause_text, ", ");
    if (seen.insert(candidate).second) texts.push_back(std::move(candidate));
  }

  if (texts.empty()) {
    result.variants.push_back(sample);
    result.warning = true;
    result.message = "no distinct rewrite available";
    return result;
  }
  if (static_cast<int>(texts.size()) < cfg.diversity) {
    result.warning = true;
    result.message = "only " + std::to_string(texts.size()) + " distinct rewrites for diversity " +
                     std::to_string(cfg.diversity);
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    MemeSample v = sample;
    v.origin = sample.lineage();
    v.id = sample.id + "#bt" + std::to_string(i + 1);
    v.text = texts[i];
    result.variants.push_back(std::move(v));
  }
  return result;
}

}  // namespace memetrn::text
