#include "memetrn/embedding/embedding.hpp"

#include <algorithm>
#include <set>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/ops.hpp"

namespace memetrn::embedding {

TextEmbedder::TextEmbedder(ParameterStore& store, const std::string& prefix, std::size_t vocab_size, std::size_t d,
                           std::size_t max_positions, double init_std, std::uint64_t seed)
    : word_(&store.add_normal(prefix + ".word", {vocab_size, d}, init_std, seed)),
      segment_(&store.add_normal(prefix + ".segment", {kSegmentCount, d}, init_std, seed)),
      position_(&store.add_normal(prefix + ".position", {max_positions, d}, init_std, seed)),
      gain_(&store.add_constant(prefix + ".ln.gain", {d}, 1.0)),
      bias_(&store.add_constant(prefix + ".ln.bias", {d}, 0.0)) {}

Var TextEmbedder::embed(Tape& tape, std::span<const std::size_t> ids, std::span<const std::size_t> segments,
                        std::span<const std::size_t> positions) const {
  if (ids.size() != segments.size() || ids.size() != positions.size()) {
    throw DimensionError("TextEmbedder: ids, segments and positions differ in length");
  }
  for (std::size_t p : positions) {
    if (p >= max_positions()) {
      throw IndexError("position " + std::to_string(p) + " exceeds table size " + std::to_string(max_positions()));
    }
  }
  const Var w = ops::embedding_lookup(tape.param(*word_), ids);
  const Var s = ops::embedding_lookup(tape.param(*segment_), segments);
  const Var p = ops::embedding_lookup(tape.param(*position_), positions);
  return ops::layer_norm(ops::add(ops::add(w, s), p), tape.param(*gain_), tape.param(*bias_));
}

VisualEmbedder::VisualEmbedder(ParameterStore& store, const std::string& prefix, std::size_t feature_dim,
                               std::size_t d, double init_std, std::uint64_t seed)
    : feat_w_(&store.add_normal(prefix + ".feat.weight", {feature_dim, d}, init_std, seed)),
      feat_b_(&store.add_constant(prefix + ".feat.bias", {d}, 0.0)),
      box_w_(&store.add_normal(prefix + ".box.weight", {4, d}, init_std, seed)),
      box_b_(&store.add_constant(prefix + ".box.bias", {d}, 0.0)),
      gain_(&store.add_constant(prefix + ".ln.gain", {d}, 1.0)),
      bias_(&store.add_constant(prefix + ".ln.bias", {d}, 0.0)) {}

Var VisualEmbedder::embed(Tape& tape, const std::vector<RegionFeature>& regions) const {
  const std::size_t n = regions.size();
  const std::size_t dim = feature_dim();
  Tensor feats({n, dim});
  Tensor boxes({n, 4});
  for (std::size_t i = 0; i < n; ++i) {
    if (regions[i].feat.size() != dim) {
      throw DimensionError("region " + std::to_string(i) + " has " + std::to_string(regions[i].feat.size()) +
                           " features, expected " + std::to_string(dim));
    }
    if (!valid_box(regions[i].box)) throw InputError("region " + std::to_string(i) + " has an invalid box");
    std::copy(regions[i].feat.begin(), regions[i].feat.end(), feats.row(i).begin());
    std::copy(regions[i].box.begin(), regions[i].box.end(), boxes.row(i).begin());
  }
  const Var f = ops::add_bias(ops::matmul(tape.constant(std::move(feats)), tape.param(*feat_w_)), tape.param(*feat_b_));
  const Var b = ops::add_bias(ops::matmul(tape.constant(std::move(boxes)), tape.param(*box_w_)), tape.param(*box_b_));
  return ops::layer_norm(ops::add(f, b), tape.param(*gain_), tape.param(*bias_));
}

std::size_t InputSequence::count(Modality m) const {
  return static_cast<std::size_t>(std::count(modalities.begin(), modalities.end(), m));
}

std::size_t InputSequence::visual_begin() const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i] == Modality::Visual || modalities[i] == Modality::Pad) return i;
  }
  return modalities.size();
}

InputSequence InputSequence::padded(std::size_t extra) const {
  InputSequence out = *this;
  for (std::size_t i = 0; i < extra; ++i) {
    out.token_ids.push_back(text::kPadId);
    out.segments.push_back(0);
    out.positions.push_back(0);
    out.modalities.push_back(Modality::Pad);
    out.mask.push_back(0.0);
  }
  return out;
}

InputSequence assemble_sequence(std::span<const std::size_t> ocr, std::span<const std::size_t> caption,
                                std::span<const std::size_t> labels, const std::vector<RegionFeature>& regions,
                                const InputFlags& flags, const SequenceLimits& limits) {
  struct Part {
    bool on;
    std::span<const std::size_t> ids;
    Segment segment;
    Modality modality;
  };
  const Part parts[] = {{flags.use_ocr, ocr, Segment::Ocr, Modality::Ocr},
                        {flags.use_caption, caption, Segment::Caption, Modality::Caption},
                        {flags.use_object_labels, labels, Segment::ObjectLabels, Modality::ObjectLabel}};

  std::size_t specials = 1;
  for (const auto& p : parts) specials += p.on ? 1 : 0;
  if (limits.max_length < specials) {
    throw InputError("max sequence length " + std::to_string(limits.max_length) + " cannot hold " +
                     std::to_string(specials) + " special tokens");
  }
  const std::size_t n_regions = flags.use_visual ? std::min(regions.size(), limits.max_regions) : 0;
  const std::size_t room = limits.max_length - specials;
  const std::size_t n_visual = std::min(n_regions, room);
  std::size_t text_budget = room - n_visual;

  InputSequence seq;
  auto push = [&](std::size_t id, Segment seg, std::size_t pos, Modality m) {
    seq.token_ids.push_back(id);
    seq.segments.push_back(static_cast<std::size_t>(seg));
    seq.positions.push_back(pos);
    seq.modalities.push_back(m);
    seq.mask.push_back(1.0);
  };

  push(text::kClsId, Segment::Ocr, 0, Modality::Special);
  seq.cls_index = 0;
  for (const auto& p : parts) {
    if (!p.on) continue;
    std::size_t pos = p.segment == Segment::Ocr ? 1 : 0;
    const std::size_t keep = std::min(p.ids.size(), text_budget);
    text_budget -= keep;
    for (std::size_t i = 0; i < keep; ++i) push(p.ids[i], p.segment, pos++, p.modality);
    push(text::kSepId, p.segment, pos, Modality::Special);
  }
  for (std::size_t r = 0; r < n_visual; ++r) {
    push(text::kPadId, Segment::Ocr, 0, Modality::Visual);
    seq.regions.push_back(regions[r]);
  }
  if (seq.size() < limits.pad_to) seq = seq.padded(limits.pad_to - seq.size());
  return seq;
}

Var embed_sequence(Tape& tape, const InputSequence& seq, const TextEmbedder& text, const VisualEmbedder& visual) {
  const std::size_t vb = seq.visual_begin();
  const std::size_t n_visual = seq.count(Modality::Visual);
  const std::size_t pad_begin = vb + n_visual;
  std::vector<Var> parts;
  auto text_rows = [&](std::size_t b, std::size_t e) {
    std::span<const std::size_t> ids(seq.token_ids.data() + b, e - b);
    std::span<const std::size_t> seg(seq.segments.data() + b, e - b);
    std::span<const std::size_t> pos(seq.positions.data() + b, e - b);
    return text.embed(tape, ids, seg, pos);
  };
  if (vb > 0) parts.push_back(text_rows(0, vb));
  if (n_visual > 0) parts.push_back(visual.embed(tape, seq.regions));
  if (pad_begin < seq.size()) parts.push_back(text_rows(pad_begin, seq.size()));
  return parts.size() == 1 ? parts.front() : ops::concat(parts, 0);
}

std::string object_label_text(const std::vector<RegionFeature>& regions) {
  std::set<std::string> seen;
  std::string out;
  for (const auto& r : regions) {
    if (r.label.empty() || !seen.insert(r.label).second) continue;
    if (!out.empty()) out += ' ';
    out += r.label;
  }
  return out;
}

InputSequence encode_meme(const MemeSample& sample, const text::Vocab& vocab, const InputFlags& flags,
                          const TokenLimits& tokens, const SequenceLimits& limits) {
  const auto ocr = text::wordpiece_tokenize(sample.text, vocab, tokens.ocr);
  const auto cap = text::wordpiece_tokenize(sample.caption.value_or(""), vocab, tokens.caption);
  const auto lab = text::wordpiece_tokenize(object_label_text(sample.regions), vocab, tokens.labels);
  return assemble_sequence(ocr.ids, cap.ids, lab.ids, sample.regions, flags, limits);
}

}  // namespace memetrn::embedding
