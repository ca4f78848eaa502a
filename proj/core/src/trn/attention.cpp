#include "memetrn/trn/attention.hpp"

#include <cmath>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/ops.hpp"

namespace memetrn::trn {

AttentionSublayer::AttentionSublayer(ParameterStore& store, const std::string& prefix, std::size_t d,
                                     std::size_t heads, double init_std, std::uint64_t seed)
    : heads_(heads) {
  if (heads == 0 || d % heads != 0) {
    throw InputError("model width " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                     " heads");
  }
  wq_ = &store.add_normal(prefix + ".q.weight", {d, d}, init_std, seed);
  bq_ = &store.add_constant(prefix + ".q.bias", {d}, 0.0);
  wk_ = &store.add_normal(prefix + ".k.weight", {d, d}, init_std, seed);
  bk_ = &store.add_constant(prefix + ".k.bias", {d}, 0.0);
  wv_ = &store.add_normal(prefix + ".v.weight", {d, d}, init_std, seed);
  bv_ = &store.add_constant(prefix + ".v.bias", {d}, 0.0);
  wo_ = &store.add_normal(prefix + ".o.weight", {d, d}, init_std, seed);
  bo_ = &store.add_constant(prefix + ".o.bias", {d}, 0.0);
  gain_ = &store.add_constant(prefix + ".ln.gain", {d}, 1.0);
  bias_ = &store.add_constant(prefix + ".ln.bias", {d}, 0.0);
}

Var AttentionSublayer::forward(Tape& tape, Var queries, Var memory, const Tensor& allowed, double dropout,
                               std::vector<Tensor>* weights) const {
  const std::size_t la = queries.value().rows();
  const std::size_t lb = memory.value().rows();
  const std::size_t d = wq_->value.rows();
  if (queries.value().cols() != d || memory.value().cols() != d) {
    throw DimensionError("attention input width " + std::to_string(queries.value().cols()) + "/" +
                         std::to_string(memory.value().cols()) + " does not match model width " + std::to_string(d));
  }
  if (allowed.shape() != Shape{la, lb}) {
    throw DimensionError("attention mask " + shape_string(allowed.shape()) + " for scores [" + std::to_string(la) +
                         "x" + std::to_string(lb) + "]");
  }
  const Var q = ops::add_bias(ops::matmul(queries, tape.param(*wq_)), tape.param(*bq_));
  const Var k = ops::add_bias(ops::matmul(memory, tape.param(*wk_)), tape.param(*bk_));
  const Var v = ops::add_bias(ops::matmul(memory, tape.param(*wv_)), tape.param(*bv_));
  const std::size_t dk = d / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<Var> contexts;
  contexts.reserve(heads_);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads_; ++h) {
    const Var qh = ops::slice(q, 1, h * dk, (h + 1) * dk);
    const Var kh = ops::slice(k, 1, h * dk, (h + 1) * dk);
    const Var vh = ops::slice(v, 1, h * dk, (h + 1) * dk);
    const Var scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    const Var probs = ops::softmax(ops::masked_fill(scores, allowed, kMaskedScore), 1);
    if (weights) weights->push_back(probs.value());
    contexts.push_back(ops::matmul(probs, vh));
  }
  const Var ctx = heads_ == 1 ? contexts.front() : ops::concat(contexts, 1);
  Var out = ops::add_bias(ops::matmul(ctx, tape.param(*wo_)), tape.param(*bo_));
  out = ops::dropout(out, dropout);
  return ops::layer_norm(ops::add(queries, out), tape.param(*gain_), tape.param(*bias_));
}

FeedForwardSublayer::FeedForwardSublayer(ParameterStore& store, const std::string& prefix, std::size_t d,
                                         double init_std, std::uint64_t seed)
    : w1_(&store.add_normal(prefix + ".fc1.weight", {d, 4 * d}, init_std, seed)),
      b1_(&store.add_constant(prefix + ".fc1.bias", {4 * d}, 0.0)),
      w2_(&store.add_normal(prefix + ".fc2.weight", {4 * d, d}, init_std, seed)),
      b2_(&store.add_constant(prefix + ".fc2.bias", {d}, 0.0)),
      gain_(&store.add_constant(prefix + ".ln.gain", {d}, 1.0)),
      bias_(&store.add_constant(prefix + ".ln.bias", {d}, 0.0)) {}

Var FeedForwardSublayer::forward(Tape& tape, Var x, double dropout) const {
  const Var hidden = ops::gelu(ops::add_bias(ops::matmul(x, tape.param(*w1_)), tape.param(*b1_)));
  Var out = ops::add_bias(ops::matmul(hidden, tape.param(*w2_)), tape.param(*b2_));
  out = ops::dropout(out, dropout);
  return ops::layer_norm(ops::add(x, out), tape.param(*gain_), tape.param(*bias_));
}

TransformerBlock::TransformerBlock(ParameterStore& store, const std::string& prefix, std::size_t d,
                                   std::size_t heads, double init_std, std::uint64_t seed)
    : attention_(store, prefix + ".attn", d, heads, init_std, seed),
      ffn_(store, prefix + ".ffn", d, init_std, seed) {}

Var TransformerBlock::forward(Tape& tape, Var queries, Var memory, const Tensor& allowed, double dropout,
                              std::vector<Tensor>* weights) const {
  return ffn_.forward(tape, attention_.forward(tape, queries, memory, allowed, dropout, weights), dropout);
}

Tensor key_mask_matrix(std::size_t queries, std::span<const double> key_mask) {
  Tensor m({queries, key_mask.size()});
  for (std::size_t i = 0; i < queries; ++i) {
    for (std::size_t j = 0; j < key_mask.size(); ++j) m(i, j) = key_mask[j];
  }
  return m;
}

Tensor causal_mask_matrix(std::span<const double> key_mask) {
  const std::size_t n = key_mask.size();
  Tensor m({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = key_mask[j];
  }
  return m;
}

}  // namespace memetrn::trn
