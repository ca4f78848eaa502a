#include "memetrn/trn/model.hpp"

#include <algorithm>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/ops.hpp"

namespace memetrn::trn {

using embedding::InputSequence;
using embedding::Modality;

std::string to_string(Variant v) { return v == Variant::OneStream ? "one-stream" : "two-stream"; }

Variant parse_variant(const std::string& name) {
  if (name == "one-stream") return Variant::OneStream;
  if (name == "two-stream") return Variant::TwoStream;
  throw InputError("unknown model variant '" + name + "' (expected one-stream or two-stream)");
}

std::size_t ModelConfig::max_positions() const {
  return std::max({tokens.ocr + 2, tokens.caption + 1, tokens.labels + 1});
}

void ModelConfig::validate() const {
  if (vocab_size <= text::kReservedCount) throw InputError("vocab_size must exceed the reserved tokens");
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw InputError("d=" + std::to_string(d) + " must be a positive multiple of heads=" + std::to_string(heads));
  }
  if (feature_dim == 0) throw InputError("feature_dim must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw InputError("dropout must be in [0, 1)");
  if (!(init_std > 0.0)) throw InputError("init_std must be positive");
  if (sequence.max_length < 4) throw InputError("sequence max_length must be at least 4");
}

DetectorModel::DetectorModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::uint64_t s = cfg_.seed;
  text_ = embedding::TextEmbedder(store_, "embed.text", cfg_.vocab_size, cfg_.d, cfg_.max_positions(), cfg_.init_std, s);
  visual_ = embedding::VisualEmbedder(store_, "embed.visual", cfg_.feature_dim, cfg_.d, cfg_.init_std, s);
  auto stack = [&](std::vector<TransformerBlock>& out, const std::string& prefix, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      out.emplace_back(store_, prefix + "." + std::to_string(i), cfg_.d, cfg_.heads, cfg_.init_std, s);
    }
  };
  if (cfg_.variant == Variant::OneStream) {
    stack(blocks_, "trn.block", cfg_.layers);
  } else {
    stack(text_blocks_, "trn.text", cfg_.text_layers);
    stack(visual_blocks_, "trn.visual", cfg_.visual_layers);
    stack(co_text_, "trn.co_text", cfg_.co_layers);
    stack(co_visual_, "trn.co_visual", cfg_.co_layers);
  }
  fc_w_ = &store_.add_normal("head.fc.weight", {cfg_.d, 2}, cfg_.init_std, s);
  fc_b_ = &store_.add_constant("head.fc.bias", {2}, 0.0);
}

Var DetectorModel::encode(Tape& tape, const InputSequence& seq, std::vector<std::vector<Tensor>>* attention) const {
  if (attention) attention->clear();
  return cfg_.variant == Variant::OneStream ? encode_one_stream(tape, seq, attention) : encode_two_stream(tape, seq);
}

Var DetectorModel::encode_one_stream(Tape& tape, const InputSequence& seq,
                                     std::vector<std::vector<Tensor>>* attention) const {
  Var h = embedding::embed_sequence(tape, seq, text_, visual_);
  const Tensor allowed = key_mask_matrix(seq.size(), seq.mask);
  for (const auto& block : blocks_) {
    std::vector<Tensor> weights;
    h = block.forward(tape, h, h, allowed, cfg_.dropout, attention ? &weights : nullptr);
    if (attention) attention->push_back(std::move(weights));
  }
  return ops::slice(h, 0, seq.cls_index, seq.cls_index + 1);
}

Var DetectorModel::encode_two_stream(Tape& tape, const InputSequence& seq) const {
  // Text stream: every non-visual slot (pads included, masked). Visual stream:
  // the visual slots, or one masked zero row when there are none.
  std::vector<std::size_t> ids, segs, pos;
  std::vector<double> text_mask;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.modalities[i] == Modality::Visual) continue;
    ids.push_back(seq.token_ids[i]);
    segs.push_back(seq.segments[i]);
    pos.push_back(seq.positions[i]);
    text_mask.push_back(seq.mask[i]);
  }
  Var ht = text_.embed(tape, ids, segs, pos);
  Var hv;
  std::vector<double> visual_mask;
  if (seq.regions.empty()) {
    hv = tape.constant(Tensor({1, cfg_.d}));
    visual_mask = {0.0};
  } else {
    hv = visual_.embed(tape, seq.regions);
    visual_mask.assign(seq.regions.size(), 1.0);
  }
  const std::size_t lt = text_mask.size();
  const std::size_t lv = visual_mask.size();
  const Tensor tt = key_mask_matrix(lt, text_mask);
  const Tensor vv = key_mask_matrix(lv, visual_mask);
  const Tensor tv = key_mask_matrix(lt, visual_mask);
  const Tensor vt = key_mask_matrix(lv, text_mask);
  for (const auto& b : text_blocks_) ht = b.forward(tape, ht, ht, tt, cfg_.dropout);
  for (const auto& b : visual_blocks_) hv = b.forward(tape, hv, hv, vv, cfg_.dropout);
  for (std::size_t l = 0; l < co_text_.size(); ++l) {
    const Var next_t = co_text_[l].forward(tape, ht, hv, tv, cfg_.dropout);
    const Var next_v = co_visual_[l].forward(tape, hv, ht, vt, cfg_.dropout);
    ht = next_t;
    hv = next_v;
  }
  return ops::slice(ht, 0, seq.cls_index, seq.cls_index + 1);
}

Var DetectorModel::logits(Tape& tape, const InputSequence& seq) const {
  return ops::add_bias(ops::matmul(encode(tape, seq), tape.param(*fc_w_)), tape.param(*fc_b_));
}

Var DetectorModel::batch_logits(Tape& tape, std::span<const InputSequence> batch) const {
  if (batch.empty()) throw InputError("empty batch");
  std::vector<Var> rows;
  rows.reserve(batch.size());
  for (const auto& seq : batch) rows.push_back(logits(tape, seq));
  return rows.size() == 1 ? rows.front() : ops::concat(rows, 0);
}

double DetectorModel::hateful_probability(const InputSequence& seq) const {
  Tape tape;
  return hateful_column(class_probabilities(logits(tape, seq))).value().data()[0];
}

Var class_probabilities(Var logits) { return ops::softmax(logits, 1); }

Var hateful_column(Var probabilities) { return ops::slice(probabilities, 1, 1, 2); }

Var bce_loss(Var p_hateful, std::span<const int> labels) {
  const Tensor& p = p_hateful.value();
  if (p.size() != labels.size()) {
    throw DimensionError("bce_loss: " + std::to_string(p.size()) + " probabilities for " +
                         std::to_string(labels.size()) + " labels");
  }
  Tape& tape = p_hateful.tape();
  Tensor y(p.shape());
  Tensor not_y(p.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y.data()[i] = labels[i] ? 1.0 : 0.0;
    not_y.data()[i] = labels[i] ? 0.0 : 1.0;
  }
  const Var pc = ops::clamp(p_hateful, kProbabilityFloor, 1.0 - kProbabilityFloor);
  const Var log_p = ops::log(pc);
  const Var log_q = ops::log(ops::add_scalar(ops::scale(pc, -1.0), 1.0));
  const Var ll = ops::add(ops::mul(log_p, tape.constant(std::move(y))), ops::mul(log_q, tape.constant(std::move(not_y))));
  return ops::scale(ops::sum(ll), -1.0 / static_cast<double>(labels.size()));
}

Var detector_loss(Tape& tape, const DetectorModel& model, std::span<const InputSequence> batch,
                  std::span<const int> labels) {
  return bce_loss(hateful_column(class_probabilities(model.batch_logits(tape, batch))), labels);
}

}  // namespace memetrn::trn
