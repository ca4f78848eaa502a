#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memetrn/data/meme.hpp"
#include "memetrn/numerics/parameter.hpp"
#include "memetrn/numerics/tape.hpp"
#include "memetrn/text/vocab.hpp"

namespace memetrn::embedding {

enum class Segment : std::size_t { Ocr = 0, Caption = 1, ObjectLabels = 2 };
inline constexpr std::size_t kSegmentCount = 3;

enum class Modality : std::uint8_t { Special, Ocr, Caption, ObjectLabel, Visual, Pad };

// LN(word[id] + segment[s] + position[p]). One instance serves OCR, caption and
// object-label rows alike.
class TextEmbedder {
 public:
  TextEmbedder() = default;
  TextEmbedder(ParameterStore& store, const std::string& prefix, std::size_t vocab_size, std::size_t d,
               std::size_t max_positions, double init_std, std::uint64_t seed);

  Var embed(Tape& tape, std::span<const std::size_t> ids, std::span<const std::size_t> segments,
            std::span<const std::size_t> positions) const;

  Parameter& word_table() const { return *word_; }
  Parameter& segment_table() const { return *segment_; }
  Parameter& position_table() const { return *position_; }
  Parameter& gain() const { return *gain_; }
  Parameter& bias() const { return *bias_; }
  std::size_t max_positions() const { return position_->value.rows(); }
  std::size_t vocab_size() const { return word_->value.rows(); }

 private:
  Parameter* word_ = nullptr;
  Parameter* segment_ = nullptr;
  Parameter* position_ = nullptr;
  Parameter* gain_ = nullptr;
  Parameter* bias_ = nullptr;
};

// LN(feat W_f + b_f + box W_p + b_p) per region, rows in input order.
class VisualEmbedder {
 public:
  VisualEmbedder() = default;
  VisualEmbedder(ParameterStore& store, const std::string& prefix, std::size_t feature_dim, std::size_t d,
                 double init_std, std::uint64_t seed);

  // Throws DimensionError on feature length mismatch and InputError on an
  // invalid box.
  Var embed(Tape& tape, const std::vector<RegionFeature>& regions) const;

  std::size_t feature_dim() const { return feat_w_->value.rows(); }
  Parameter& feature_weight() const { return *feat_w_; }
  Parameter& box_weight() const { return *box_w_; }

 private:
  Parameter* feat_w_ = nullptr;
  Parameter* feat_b_ = nullptr;
  Parameter* box_w_ = nullptr;
  Parameter* box_b_ = nullptr;
  Parameter* gain_ = nullptr;
  Parameter* bias_ = nullptr;
};

struct InputFlags {
  bool use_ocr = true;
  bool use_caption = true;
  bool use_object_labels = true;
  bool use_visual = true;

  friend bool operator==(const InputFlags&, const InputFlags&) = default;
};

struct SequenceLimits {
  std::size_t max_length = 128;
  std::size_t max_regions = 10;
  // Pad the sequence to this many slots (0: no padding).
  std::size_t pad_to = 0;

  friend bool operator==(const SequenceLimits&, const SequenceLimits&) = default;
};

// Joint layout [CLS] OCR [SEP] caption [SEP] labels [SEP] visual pads, with
// disabled textual segments omitted together with their [SEP]. Positions
// restart at 0 per textual segment ([CLS] is position 0 of the OCR segment);
// visual slots and pads use position 0.
struct InputSequence {
  std::vector<std::size_t> token_ids;  // kPadId for visual slots
  std::vector<std::size_t> segments;
  std::vector<std::size_t> positions;
  std::vector<Modality> modalities;
  std::vector<double> mask;  // 1 real, 0 pad
  std::vector<RegionFeature> regions;
  std::size_t cls_index = 0;

  std::size_t size() const { return token_ids.size(); }
  std::size_t count(Modality m) const;
  // First slot of the visual block (== number of textual slots).
  std::size_t visual_begin() const;
  // Copy with `extra` pad slots appended.
  InputSequence padded(std::size_t extra) const;
};

// Textual ids are kept front-first until the length budget runs out; visual
// slots are only cut when the specials alone leave no room for them. [CLS]
// and each enabled segment's [SEP] always survive. Throws InputError when
// max_length cannot hold the specials.
InputSequence assemble_sequence(std::span<const std::size_t> ocr, std::span<const std::size_t> caption,
                                std::span<const std::size_t> labels, const std::vector<RegionFeature>& regions,
                                const InputFlags& flags, const SequenceLimits& limits);

// Embeds every slot: textual and pad slots through `text`, visual slots through
// `visual`, concatenated in sequence order. [L x d].
Var embed_sequence(Tape& tape, const InputSequence& seq, const TextEmbedder& text, const VisualEmbedder& visual);

// Object label words of the regions, first occurrence order, deduplicated.
std::string object_label_text(const std::vector<RegionFeature>& regions);

struct TokenLimits {
  std::size_t ocr = 32;
  std::size_t caption = 24;
  std::size_t labels = 16;

  friend bool operator==(const TokenLimits&, const TokenLimits&) = default;
};

// Tokenises a meme's OCR text, caption and region labels and assembles them.
// A missing caption is treated as empty.
InputSequence encode_meme(const MemeSample& sample, const text::Vocab& vocab, const InputFlags& flags,
                          const TokenLimits& tokens, const SequenceLimits& limits);

}  // namespace memetrn::embedding
