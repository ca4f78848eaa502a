#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memetrn/data/dataset_io.hpp"
#include "memetrn/data/meme.hpp"
#include "memetrn/metrics/cider.hpp"
#include "memetrn/numerics/parameter.hpp"
#include "memetrn/numerics/rng.hpp"
#include "memetrn/numerics/tape.hpp"
#include "memetrn/text/vocab.hpp"
#include "memetrn/trn/attention.hpp"

namespace memetrn::captioner {

struct CaptionerConfig {
  std::size_t vocab_size = 0;
  std::size_t feature_dim = 32;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  // Longest generated sequence, counting the closing [EOS].
  std::size_t max_length = 16;
  double init_std = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const CaptionerConfig&, const CaptionerConfig&) = default;
};

struct DecodeConfig {
  std::size_t max_length = 16;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// A decoded sequence. `ids` holds every emitted token including a final
// [EOS] when one was produced; `step_log_probs[t]` is log p(ids[t] | prefix).
struct Decoded {
  std::vector<std::size_t> ids;
  std::vector<double> step_log_probs;
  double log_prob = 0.0;

  bool terminated() const { return !ids.empty() && ids.back() == text::kEosId; }
  // ids without the closing [EOS].
  std::vector<std::size_t> words() const;
};

// Pools regions into f_I and projects every region into the decoder width.
// The cross-attention memory is [f_I; r_1; ...; r_N], all rows layer-normed.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ParameterStore& store, const std::string& prefix, std::size_t feature_dim, std::size_t d,
               double init_std, std::uint64_t seed);

  // Throws InputError without regions and DimensionError on a feature-length
  // mismatch.
  Var encode(Tape& tape, std::span<const RegionFeature> regions) const;

 private:
  std::size_t feature_dim_ = 0;
  Parameter *weight_ = nullptr, *bias_ = nullptr, *gain_ = nullptr, *ln_bias_ = nullptr;
};

// Causal self-attention, cross-attention to the image memory, feed-forward.
class DecoderBlock {
 public:
  DecoderBlock() = default;
  DecoderBlock(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t heads, double init_std,
               std::uint64_t seed);
  Var forward(Tape& tape, Var x, Var memory) const;

 private:
  trn::AttentionSublayer self_;
  trn::AttentionSublayer cross_;
  trn::FeedForwardSublayer ffn_;
};

class Captioner {
 public:
  explicit Captioner(const CaptionerConfig& cfg);
  Captioner(const Captioner&) = delete;
  Captioner& operator=(const Captioner&) = delete;

  const CaptionerConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  Var memory(Tape& tape, std::span<const RegionFeature> regions) const;
  // Next-token logits [T x V] for decoder inputs [T] (starting with [BOS]).
  Var logits(Tape& tape, Var memory, std::span<const std::size_t> inputs) const;

 private:
  CaptionerConfig cfg_;
  ParameterStore store_;
  ImageEncoder encoder_;
  Parameter *word_ = nullptr, *position_ = nullptr, *gain_ = nullptr, *ln_bias_ = nullptr;
  std::vector<DecoderBlock> blocks_;
  Parameter *out_w_ = nullptr, *out_b_ = nullptr;
};

// Reference caption -> token ids followed by [EOS]. Throws InputError when
// the result would exceed max_length.
std::vector<std::size_t> reference_ids(const std::string& caption, const text::Vocab& vocab, std::size_t max_length);
// Caption text for generated ids; reserved tokens are dropped.
std::string caption_text(std::span<const std::size_t> ids, const text::Vocab& vocab);

Decoded decode_greedy(const Captioner& model, std::span<const RegionFeature> regions, const DecodeConfig& cfg);
Decoded sample_caption(const Captioner& model, std::span<const RegionFeature> regions, const DecodeConfig& cfg,
                       Rng& rng);

// Sum of log p(ids[t] | ids[<t], I) at the given temperature, computed by one
// teacher-forced pass. Independent of the step-by-step decoders.
double score_sequence(const Captioner& model, std::span<const RegionFeature> regions,
                      std::span<const std::size_t> ids, double temperature = 1.0);

// Teacher-forced log p(ids | I) as a differentiable scalar.
Var sequence_log_prob(Tape& tape, const Captioner& model, std::span<const RegionFeature> regions,
                      std::span<const std::size_t> ids);

struct CaptionTarget {
  std::span<const RegionFeature> regions;
  std::vector<std::size_t> ids;  // ends with [EOS]
};

// Mean over the batch of the summed token negative log-likelihood.
Var xe_loss(Tape& tape, const Captioner& model, std::span<const CaptionTarget> batch);

struct TokenAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};
// Teacher-forced argmax accuracy over every target token.
TokenAccuracy token_accuracy(const Captioner& model, std::span<const CaptionTarget> batch);

struct ScstOutcome {
  Var surrogate;
  Decoded sample;
  Decoded greedy;
  double sample_reward = 0.0;
  double greedy_reward = 0.0;
  double advantage() const { return sample_reward - greedy_reward; }
};

// One self-critical step for a single image: sample and greedy captions are
// rewarded with CIDEr-D against `references`; the advantage enters as a
// constant, surrogate = -(r(sample) - r(greedy)) * log p(sample).
ScstOutcome scst_step(Tape& tape, const Captioner& model, std::span<const RegionFeature> regions,
                      const std::vector<metrics::Tokens>& references, const metrics::IdfTable& idf,
                      const text::Vocab& vocab, const DecodeConfig& cfg, Rng& rng,
                      const metrics::CiderOptions& reward = {});

// Greedy caption for every meme. Samples whose regions cannot be encoded get
// an error record and no caption.
std::vector<CaptionRecord> caption_dataset(std::vector<MemeSample>& memes, const Captioner& model,
                                           const text::Vocab& vocab, const DecodeConfig& cfg);

}  // namespace memetrn::captioner
