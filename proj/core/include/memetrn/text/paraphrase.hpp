#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "memetrn/data/meme.hpp"

namespace memetrn::text {

enum class ParaphraseMode { SynonymSubstitution, ClauseReorder, Both };

// Label-preserving rewrite of OCR text. Stands in for back-translation: the
// diversity level plays the role of the decoder beam size (2, 5 or 10
// variants per sentence).
struct ParaphraseConfig {
  ParaphraseMode mode = ParaphraseMode::Both;
  int diversity = 2;
  std::uint64_t seed = 0;
  // word -> interchangeable alternatives. Keys and values are lowercase.
  std::map<std::string, std::vector<std::string>> lexicon;
  // Label-relevant words; never substituted and never introduced.
  std::set<std::string> protected_words;
  // Per-word substitution probability when a synonym exists.
  double substitution_rate = 0.5;
};

struct ParaphraseResult {
  std::vector<MemeSample> variants;
  // Set when fewer than `diversity` distinct rewrites exist or the input text
  // was empty.
  bool warning = false;
  std::string message;
};

bool valid_diversity(int k);

// Up to cfg.diversity distinct rewrites of sample.text, each differing from the
// original. Label, regions, caption and lineage are copied unchanged; ids get a
// "#bt<i>" suffix. When no rewrite is possible the input is returned as the
// single element.
ParaphraseResult paraphrase_augment(const MemeSample& sample, const ParaphraseConfig& cfg);

}  // namespace memetrn::text
