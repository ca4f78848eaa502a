#pragma once

// Small worlds, vocabularies and model configs shared by several test files.

#include <vector>

#include "memetrn/data/world.hpp"
#include "memetrn/embedding/embedding.hpp"
#include "memetrn/text/vocab.hpp"
#include "memetrn/trn/model.hpp"

namespace memetrn::testing {

inline WorldConfig tiny_world_config(std::uint64_t seed = 3, std::size_t n = 200) {
  WorldConfig cfg = WorldConfig::defaults();
  cfg.seed = seed;
  cfg.n_samples = n;
  cfg.feature_dim = 8;
  cfg.prototype_scale = 1.0;
  cfg.feature_noise = 0.1;
  cfg.regions_per_image = 3;
  cfg.caption_images = 20;
  cfg.max_clauses = 2;
  cfg.max_clause_words = 3;
  cfg.gold_captions = true;
  return cfg;
}

inline text::Vocab world_vocab(const WorldConfig& cfg, std::size_t size = 200) {
  std::vector<std::string> corpus(cfg.benign_words.begin(), cfg.benign_words.end());
  corpus.insert(corpus.end(), cfg.trigger_words.begin(), cfg.trigger_words.end());
  corpus.insert(corpus.end(), cfg.concepts.begin(), cfg.concepts.end());
  corpus.insert(corpus.end(), cfg.caption_templates.begin(), cfg.caption_templates.end());
  corpus.push_back(",");
  return text::build_vocab(corpus, size);
}

inline trn::ModelConfig tiny_model_config(std::size_t vocab_size, trn::Variant variant, std::size_t feature_dim = 8) {
  trn::ModelConfig m;
  m.variant = variant;
  m.vocab_size = vocab_size;
  m.d = 16;
  m.heads = 2;
  m.layers = 2;
  m.text_layers = 1;
  m.visual_layers = 1;
  m.co_layers = 1;
  m.feature_dim = feature_dim;
  m.tokens = {8, 8, 4};
  m.sequence = {40, 3, 0};
  m.dropout = 0.0;
  m.init_std = 0.3;
  m.seed = 7;
  return m;
}

}  // namespace memetrn::testing
