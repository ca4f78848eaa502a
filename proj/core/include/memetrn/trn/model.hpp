#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memetrn/embedding/embedding.hpp"
#include "memetrn/numerics/parameter.hpp"
#include "memetrn/numerics/tape.hpp"
#include "memetrn/trn/attention.hpp"

namespace memetrn::trn {

enum class Variant { OneStream, TwoStream };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::OneStream;
  std::size_t vocab_size = 0;
  std::size_t d = 64;
  std::size_t heads = 4;
  // One-stream depth.
  std::size_t layers = 2;
  // Two-stream depths.
  std::size_t text_layers = 2;
  std::size_t visual_layers = 2;
  std::size_t co_layers = 1;
  std::size_t feature_dim = 32;
  embedding::TokenLimits tokens;
  embedding::SequenceLimits sequence;
  double dropout = 0.1;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  // Rows of the position table: enough for the longest textual segment plus
  // its specials.
  std::size_t max_positions() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Embeddings, transformer stack(s) and a d -> 2 classifier over h_[CLS].
class DetectorModel {
 public:
  explicit DetectorModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const embedding::TextEmbedder& text_embedder() const { return text_; }
  const embedding::VisualEmbedder& visual_embedder() const { return visual_; }

  // h_[CLS] as a [1 x d] row. Two-stream reads it from the text stream.
  // When `attention` is non-null it collects the per-head weights of the
  // one-stream self-attention layers.
  Var encode(Tape& tape, const embedding::InputSequence& seq, std::vector<std::vector<Tensor>>* attention = nullptr) const;
  // Classifier logits [1 x 2]: column 0 non-hateful, column 1 hateful.
  Var logits(Tape& tape, const embedding::InputSequence& seq) const;
  Var batch_logits(Tape& tape, std::span<const embedding::InputSequence> batch) const;

  // Evaluation-mode p(hateful).
  double hateful_probability(const embedding::InputSequence& seq) const;

 private:
  Var encode_one_stream(Tape& tape, const embedding::InputSequence& seq,
                        std::vector<std::vector<Tensor>>* attention) const;
  Var encode_two_stream(Tape& tape, const embedding::InputSequence& seq) const;

  ModelConfig cfg_;
  ParameterStore store_;
  embedding::TextEmbedder text_;
  embedding::VisualEmbedder visual_;
  std::vector<TransformerBlock> blocks_;
  std::vector<TransformerBlock> text_blocks_;
  std::vector<TransformerBlock> visual_blocks_;
  std::vector<TransformerBlock> co_text_;
  std::vector<TransformerBlock> co_visual_;
  Parameter* fc_w_ = nullptr;
  Parameter* fc_b_ = nullptr;
};

// Row-wise softmax over the two logits.
Var class_probabilities(Var logits);
// Column 1 of the probabilities, [B x 1].
Var hateful_column(Var probabilities);

inline constexpr double kProbabilityFloor = 1e-12;

// Mean of -[y log p + (1-y) log(1-p)] with p clamped to [1e-12, 1-1e-12].
Var bce_loss(Var p_hateful, std::span<const int> labels);

// bce_loss(hateful_column(class_probabilities(batch_logits(...)))).
Var detector_loss(Tape& tape, const DetectorModel& model, std::span<const embedding::InputSequence> batch,
                  std::span<const int> labels);

}  // namespace memetrn::trn
