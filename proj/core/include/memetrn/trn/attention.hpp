#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memetrn/numerics/parameter.hpp"
#include "memetrn/numerics/tape.hpp"

namespace memetrn::trn {

inline constexpr double kMaskedScore = -1e9;

// Multi-head attention with output projection, residual and layer norm.
class AttentionSublayer {
 public:
  AttentionSublayer() = default;
  AttentionSublayer(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t heads,
                    double init_std, std::uint64_t seed);

  // Queries from `queries` [La x d], keys and values from `memory` [Lb x d].
  // allowed(i, j) == 0 hides key j from query i (score set to -1e9 before the
  // softmax, so a fully hidden row degrades to uniform weights). When
  // `weights` is non-null it receives one [La x Lb] matrix per head.
  Var forward(Tape& tape, Var queries, Var memory, const Tensor& allowed, double dropout,
              std::vector<Tensor>* weights = nullptr) const;

  std::size_t heads() const { return heads_; }

 private:
  std::size_t heads_ = 1;
  Parameter *wq_ = nullptr, *bq_ = nullptr, *wk_ = nullptr, *bk_ = nullptr;
  Parameter *wv_ = nullptr, *bv_ = nullptr, *wo_ = nullptr, *bo_ = nullptr;
  Parameter *gain_ = nullptr, *bias_ = nullptr;
};

// Position-wise d -> 4d -> d GELU network with residual and layer norm.
class FeedForwardSublayer {
 public:
  FeedForwardSublayer() = default;
  FeedForwardSublayer(ParameterStore& store, const std::string& prefix, std::size_t d, double init_std,
                      std::uint64_t seed);
  Var forward(Tape& tape, Var x, double dropout) const;

 private:
  Parameter *w1_ = nullptr, *b1_ = nullptr, *w2_ = nullptr, *b2_ = nullptr;
  Parameter *gain_ = nullptr, *bias_ = nullptr;
};

// Post-norm transformer block: attention sublayer then feed-forward sublayer.
// Self-attention passes the same Var as queries and memory; co-attention
// passes the other stream as memory.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t heads,
                   double init_std, std::uint64_t seed);
  Var forward(Tape& tape, Var queries, Var memory, const Tensor& allowed, double dropout,
              std::vector<Tensor>* weights = nullptr) const;

 private:
  AttentionSublayer attention_;
  FeedForwardSublayer ffn_;
};

// allowed(i, j) = key_mask[j] for an [La x Lb] score matrix.
Tensor key_mask_matrix(std::size_t queries, std::span<const double> key_mask);
// allowed(i, j) = key_mask[j] and j <= i.
Tensor causal_mask_matrix(std::span<const double> key_mask);

}  // namespace memetrn::trn
