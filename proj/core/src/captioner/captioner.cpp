#include "memetrn/captioner/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/ops.hpp"

namespace memetrn::captioner {

void CaptionerConfig::validate() const {
  if (vocab_size <= text::kReservedCount) throw InputError("captioner vocab_size must exceed the reserved tokens");
  if (feature_dim == 0) throw InputError("captioner feature_dim must be positive");
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw InputError("captioner d=" + std::to_string(d) + " must be a positive multiple of heads=" +
                     std::to_string(heads));
  }
  if (max_length == 0) throw InputError("captioner max_length must be at least 1");
  if (!(init_std > 0.0)) throw InputError("captioner init_std must be positive");
}

void DecodeConfig::validate() const {
  if (max_length == 0) throw InputError("decode max_length must be at least 1");
  if (!(temperature > 0.0)) throw InputError("decode temperature must be positive");
}

std::vector<std::size_t> Decoded::words() const {
  std::vector<std::size_t> out = ids;
  if (terminated()) out.pop_back();
  return out;
}

ImageEncoder::ImageEncoder(ParameterStore& store, const std::string& prefix, std::size_t feature_dim, std::size_t d,
                           double init_std, std::uint64_t seed)
    : feature_dim_(feature_dim) {
  weight_ = &store.add_normal(prefix + ".weight", {feature_dim, d}, init_std, seed);
  bias_ = &store.add_constant(prefix + ".bias", {d}, 0.0);
  gain_ = &store.add_constant(prefix + ".ln.gain", {d}, 1.0);
  ln_bias_ = &store.add_constant(prefix + ".ln.bias", {d}, 0.0);
}

Var ImageEncoder::encode(Tape& tape, std::span<const RegionFeature> regions) const {
  if (regions.empty()) throw InputError("image has no region features");
  Tensor feats({regions.size(), feature_dim_});
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].feat.size() != feature_dim_) {
      throw DimensionError("region " + std::to_string(i) + " has " + std::to_string(regions[i].feat.size()) +
                           " features, expected " + std::to_string(feature_dim_));
    }
    std::copy(regions[i].feat.begin(), regions[i].feat.end(), feats.row(i).begin());
  }
  const Var f = tape.constant(std::move(feats));
  const Var rows = ops::concat({ops::mean_rows(f), f}, 0);
  const Var projected = ops::add_bias(ops::matmul(rows, tape.param(*weight_)), tape.param(*bias_));
  return ops::layer_norm(projected, tape.param(*gain_), tape.param(*ln_bias_));
}

DecoderBlock::DecoderBlock(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t heads,
                           double init_std, std::uint64_t seed)
    : self_(store, prefix + ".self", d, heads, init_std, seed),
      cross_(store, prefix + ".cross", d, heads, init_std, seed),
      ffn_(store, prefix + ".ffn", d, init_std, seed) {}

Var DecoderBlock::forward(Tape& tape, Var x, Var memory) const {
  const std::size_t t = x.value().rows();
  const std::vector<double> ones(t, 1.0);
  const Tensor causal = trn::causal_mask_matrix(ones);
  const std::vector<double> mem_ones(memory.value().rows(), 1.0);
  const Tensor all = trn::key_mask_matrix(t, mem_ones);
  Var h = self_.forward(tape, x, x, causal, 0.0);
  h = cross_.forward(tape, h, memory, all, 0.0);
  return ffn_.forward(tape, h, 0.0);
}

Captioner::Captioner(const CaptionerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::uint64_t s = cfg_.seed;
  encoder_ = ImageEncoder(store_, "image", cfg_.feature_dim, cfg_.d, cfg_.init_std, s);
  word_ = &store_.add_normal("decoder.word", {cfg_.vocab_size, cfg_.d}, cfg_.init_std, s);
  position_ = &store_.add_normal("decoder.position", {cfg_.max_length, cfg_.d}, cfg_.init_std, s);
  gain_ = &store_.add_constant("decoder.ln.gain", {cfg_.d}, 1.0);
  ln_bias_ = &store_.add_constant("decoder.ln.bias", {cfg_.d}, 0.0);
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    blocks_.emplace_back(store_, "decoder.block." + std::to_string(i), cfg_.d, cfg_.heads, cfg_.init_std, s);
  }
  out_w_ = &store_.add_normal("decoder.out.weight", {cfg_.d, cfg_.vocab_size}, cfg_.init_std, s);
  out_b_ = &store_.add_constant("decoder.out.bias", {cfg_.vocab_size}, 0.0);
}

Var Captioner::memory(Tape& tape, std::span<const RegionFeature> regions) const {
  return encoder_.encode(tape, regions);
}

Var Captioner::logits(Tape& tape, Var memory, std::span<const std::size_t> inputs) const {
  if (inputs.empty()) throw InputError("decoder needs at least one input token");
  if (inputs.size() > cfg_.max_length) {
    throw IndexError("decoder input of length " + std::to_string(inputs.size()) + " exceeds max_length " +
                     std::to_string(cfg_.max_length));
  }
  std::vector<std::size_t> pos(inputs.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  const Var words = ops::embedding_lookup(tape.param(*word_), inputs);
  const Var positions = ops::embedding_lookup(tape.param(*position_), pos);
  Var h = ops::layer_norm(ops::add(words, positions), tape.param(*gain_), tape.param(*ln_bias_));
  for (const auto& block : blocks_) h = block.forward(tape, h, memory);
  return ops::add_bias(ops::matmul(h, tape.param(*out_w_)), tape.param(*out_b_));
}

std::vector<std::size_t> reference_ids(const std::string& caption, const text::Vocab& vocab, std::size_t max_length) {
  const auto tok = text::wordpiece_tokenize(caption, vocab, std::numeric_limits<std::size_t>::max());
  if (tok.ids.size() + 1 > max_length) {
    throw InputError("reference caption needs " + std::to_string(tok.ids.size() + 1) +
                     " tokens with [EOS], more than max_length " + std::to_string(max_length));
  }
  std::vector<std::size_t> ids = tok.ids;
  ids.push_back(text::kEosId);
  return ids;
}

std::string caption_text(std::span<const std::size_t> ids, const text::Vocab& vocab) {
  std::vector<std::size_t> kept;
  for (std::size_t id : ids) {
    if (id >= text::kReservedCount) kept.push_back(id);
  }
  return text::detokenize(kept, vocab);
}

namespace {

// Decoder inputs for scoring `ids`: [BOS] followed by all but the last id.
std::vector<std::size_t> shifted_inputs(std::span<const std::size_t> ids) {
  std::vector<std::size_t> in;
  in.reserve(ids.size());
  in.push_back(text::kBosId);
  in.insert(in.end(), ids.begin(), ids.end() - (ids.empty() ? 0 : 1));
  return in;
}

// Log-probabilities of the next token after `prefix`, at temperature tau.
std::vector<double> next_log_probs(const Captioner& model, Tape& tape, Var memory,
                                   const std::vector<std::size_t>& prefix, double tau) {
  const Var z = model.logits(tape, memory, prefix);
  const Tensor& zv = z.value();
  const std::size_t v = zv.cols();
  const std::size_t last = zv.rows() - 1;
  std::vector<double> row(v);
  for (std::size_t c = 0; c < v; ++c) row[c] = zv(last, c) / tau;
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double x : row) total += std::exp(x - mx);
  const double lse = mx + std::log(total);
  for (double& x : row) x -= lse;
  return row;
}

template <class Choose>
Decoded decode(const Captioner& model, std::span<const RegionFeature> regions, const DecodeConfig& cfg,
               Choose&& choose) {
  cfg.validate();
  const std::size_t limit = std::min(cfg.max_length, model.config().max_length);
  Tape tape;
  const Var memory = model.memory(tape, regions);
  Decoded out;
  std::vector<std::size_t> prefix{text::kBosId};
  while (out.ids.size() < limit) {
    const std::vector<double> lp = next_log_probs(model, tape, memory, prefix, cfg.temperature);
    const std::size_t next = choose(lp);
    out.ids.push_back(next);
    out.step_log_probs.push_back(lp[next]);
    out.log_prob += lp[next];
    if (next == text::kEosId) break;
    prefix.push_back(next);
  }
  return out;
}

}  // namespace

Decoded decode_greedy(const Captioner& model, std::span<const RegionFeature> regions, const DecodeConfig& cfg) {
  DecodeConfig greedy = cfg;
  greedy.temperature = 1.0;
  return decode(model, regions, greedy, [](const std::vector<double>& lp) {
    return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  });
}

Decoded sample_caption(const Captioner& model, std::span<const RegionFeature> regions, const DecodeConfig& cfg,
                       Rng& rng) {
  return decode(model, regions, cfg, [&rng](const std::vector<double>& lp) {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t c = 0; c < lp.size(); ++c) {
      const double p = std::exp(lp[c]);
      if (p > 0.0) last_positive = c;
      cum += p;
      if (u < cum) return c;
    }
    return last_positive;
  });
}

double score_sequence(const Captioner& model, std::span<const RegionFeature> regions,
                      std::span<const std::size_t> ids, double temperature) {
  if (ids.empty()) return 0.0;
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  Tape tape;
  const Var memory = model.memory(tape, regions);
  const std::vector<std::size_t> in = shifted_inputs(ids);
  const Var lp = ops::log_softmax(ops::scale(model.logits(tape, memory, in), 1.0 / temperature));
  double total = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) total += lp.value()(t, ids[t]);
  return total;
}

Var sequence_log_prob(Tape& tape, const Captioner& model, std::span<const RegionFeature> regions,
                      std::span<const std::size_t> ids) {
  if (ids.empty()) throw InputError("cannot score an empty sequence");
  const Var memory = model.memory(tape, regions);
  const Var z = model.logits(tape, memory, shifted_inputs(ids));
  return ops::scale(ops::cross_entropy(z, ids), -1.0);
}

Var xe_loss(Tape& tape, const Captioner& model, std::span<const CaptionTarget> batch) {
  if (batch.empty()) throw InputError("empty caption batch");
  std::vector<Var> terms;
  terms.reserve(batch.size());
  for (const CaptionTarget& item : batch) {
    if (item.ids.empty() || item.ids.back() != text::kEosId) {
      throw InputError("reference token sequence must be nonempty and end with [EOS]");
    }
    if (item.ids.size() > model.config().max_length) {
      throw InputError("reference of " + std::to_string(item.ids.size()) + " tokens exceeds max_length " +
                       std::to_string(model.config().max_length));
    }
    const Var memory = model.memory(tape, item.regions);
    terms.push_back(ops::cross_entropy(model.logits(tape, memory, shifted_inputs(item.ids)), item.ids));
  }
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ops::add(total, terms[i]);
  return ops::scale(total, 1.0 / static_cast<double>(batch.size()));
}

TokenAccuracy token_accuracy(const Captioner& model, std::span<const CaptionTarget> batch) {
  TokenAccuracy acc;
  for (const CaptionTarget& item : batch) {
    Tape tape;
    const Var memory = model.memory(tape, item.regions);
    const Tensor z = model.logits(tape, memory, shifted_inputs(item.ids)).value();
    for (std::size_t t = 0; t < item.ids.size(); ++t) {
      const auto row = z.row(t);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      acc.correct += best == item.ids[t] ? 1 : 0;
      ++acc.total;
    }
  }
  return acc;
}

ScstOutcome scst_step(Tape& tape, const Captioner& model, std::span<const RegionFeature> regions,
                      const std::vector<metrics::Tokens>& references, const metrics::IdfTable& idf,
                      const text::Vocab& vocab, const DecodeConfig& cfg, Rng& rng,
                      const metrics::CiderOptions& reward) {
  ScstOutcome out;
  out.sample = sample_caption(model, regions, cfg, rng);
  out.greedy = decode_greedy(model, regions, cfg);
  auto score = [&](const Decoded& d) {
    return metrics::cider_d(metrics::caption_words(caption_text(d.ids, vocab)), references, idf, reward);
  };
  out.sample_reward = score(out.sample);
  out.greedy_reward = score(out.greedy);
  const double advantage = out.advantage();
  const Var log_p = sequence_log_prob(tape, model, regions, out.sample.ids);
  out.surrogate = ops::scale(log_p, -advantage);
  return out;
}

std::vector<CaptionRecord> caption_dataset(std::vector<MemeSample>& memes, const Captioner& model,
                                           const text::Vocab& vocab, const DecodeConfig& cfg) {
  if (vocab.size() != model.config().vocab_size) {
    throw InputError("vocabulary has " + std::to_string(vocab.size()) + " tokens but the captioner expects " +
                     std::to_string(model.config().vocab_size));
  }
  std::vector<CaptionRecord> records;
  records.reserve(memes.size());
  for (MemeSample& meme : memes) {
    CaptionRecord rec;
    rec.id = meme.id;
    try {
      const Decoded d = decode_greedy(model, meme.regions, cfg);
      rec.caption = caption_text(d.ids, vocab);
      rec.log_prob = d.log_prob;
      meme.caption = rec.caption;
    } catch (const InputError& e) {
      rec.error = e.what();
      meme.caption.reset();
    } catch (const DimensionError& e) {
      rec.error = e.what();
      meme.caption.reset();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace memetrn::captioner
