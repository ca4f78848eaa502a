#pragma once

// Synthetic meme world. Every sample carries two hidden indicators, "OCR text
// contains a trigger word" and "image contains a trigger concept", and its label
// is a planted rule over them (AND or XOR), optionally flipped by label noise.
// Under XOR each indicator alone carries no label information, so only a
// model that fuses both modalities can do better than chance.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memetrn/data/meme.hpp"
#include "memetrn/numerics/tensor.hpp"

namespace memetrn {

enum class PlantedRule { And, Xor };

std::string to_string(PlantedRule rule);
PlantedRule parse_rule(const std::string& name);
int apply_rule(PlantedRule rule, bool text_trigger, bool visual_trigger);

struct WorldConfig {
  std::uint64_t seed = 1;
  std::size_t n_samples = 10000;
  PlantedRule rule = PlantedRule::Xor;

  std::vector<std::string> trigger_words;
  std::vector<std::string> benign_words;
  // Synonyms over benign words, handed to the paraphraser.
  std::map<std::string, std::vector<std::string>> synonyms;
  std::size_t min_clauses = 2;
  std::size_t max_clauses = 3;
  std::size_t min_clause_words = 2;
  std::size_t max_clause_words = 4;

  std::vector<std::string> concepts;
  // Subset of `concepts` that sets the visual indicator.
  std::vector<std::string> trigger_concepts;
  std::size_t feature_dim = 32;
  double prototype_scale = 1.0;
  double feature_noise = 0.25;
  std::size_t regions_per_image = 10;
  // Trigger concepts reuse the prototype of a benign concept, so the visual
  // indicator is invisible in region features and only shows up in words
  // (object labels, captions).
  bool alias_trigger_features = false;

  double label_noise = 0.0;
  double train_positive_rate = 0.36;
  double dev_fraction = 0.05;
  double test_fraction = 0.10;

  std::size_t caption_images = 200;
  std::size_t references_per_image = 5;
  // "{a}" and "{b}" are replaced by the image's two concepts (alphabetical).
  // Template 0 is the canonical caption.
  std::vector<std::string> caption_templates;
  // Fill MemeSample::caption with the canonical template caption.
  bool gold_captions = false;

  static WorldConfig defaults();
  // Throws InputError on violated invariants (overlapping lexicons, unknown
  // trigger concepts, prototype separation, infeasible split sizes).
  void validate() const;
};

// Per-sample record of the planted indicators, enough to re-derive the label
// without re-running the generator.
struct Provenance {
  std::string id;
  bool text_trigger = false;
  bool visual_trigger = false;
  bool flipped = false;
  PlantedRule rule = PlantedRule::Xor;
  std::vector<std::string> concepts;

  int label() const { return apply_rule(rule, text_trigger, visual_trigger) ^ (flipped ? 1 : 0); }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
  std::size_t train_positive = 0;
};

// Dev and test are fully balanced; train holds the remainder at the configured
// positive rate. Throws InputError when balance cannot be met exactly.
SplitSizes plan_splits(const WorldConfig& cfg);

struct SyntheticWorld {
  std::vector<MemeSample> train;
  std::vector<MemeSample> dev;
  std::vector<MemeSample> test;
  std::vector<CaptionSample> captions;
  std::vector<Provenance> provenance;
  // Visual concept prototypes, row i for cfg.concepts[i].
  Tensor prototypes;
  // Non-empty when a class could not be produced (e.g. AND with no trigger
  // words): labels then follow the rule and balance is not enforced.
  std::string warning;
};

SyntheticWorld gen_synthetic(const WorldConfig& cfg);

// Which split each sample goes to.
enum class Split { Train, Dev, Test };

struct SplitProportions {
  double dev = 0.05;
  double test = 0.10;
};

// Deterministic stratified assignment. With `balance`, dev and test take equal
// positives and negatives (sizes rounded to the nearest even count) and throw
// InputError when a class runs short; otherwise each class is split
// proportionally.
std::vector<Split> make_splits(const std::vector<MemeSample>& samples, const SplitProportions& proportions,
                               bool balance, std::uint64_t seed);

// Whether text contains any word from the trigger lexicon (after
// normalisation). This is the text half of the planted rule.
bool contains_trigger(const std::string& text, const std::vector<std::string>& trigger_words);

}  // namespace memetrn
