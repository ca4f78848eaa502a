#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "memetrn/numerics/tape.hpp"

// Differentiable operations. Each records one node on the inputs' tape.
// Matrix operations take rank-2 inputs; elementwise ones accept any shape.
namespace memetrn::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a[m x n] + bias[n] broadcast over rows. bias may be rank-1 or [1 x n].
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);

Var matmul(Var a, Var b);
Var transpose(Var a);

// Softmax along `axis`, computed after subtracting the slice maximum.
Var softmax(Var x, std::size_t axis);
// Log-softmax along the last axis.
Var log_softmax(Var x);
// Per-row (x - mean) / sqrt(var + eps) * gain + bias over the last axis.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-12);
// Row gather; repeated ids accumulate in the backward scatter.
Var embedding_lookup(Var table, std::span<const std::size_t> ids);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);

Var gelu(Var a);
Var relu(Var a);
Var log(Var a);
Var exp(Var a);
// Elementwise clamp; gradient is zero where the bound is active.
Var clamp(Var a, double lo, double hi);
// Inverted dropout; identity when the tape is not in training mode or p == 0.
Var dropout(Var a, double p);

// Sets entries where mask == 0 to `value`. Masked entries receive no gradient.
Var masked_fill(Var a, const Tensor& mask, double value);

Var sum(Var a);
Var mean(Var a);
// Column means of a [m x n] -> [1 x n].
Var mean_rows(Var a);
// Elements a(i, index[i]) -> [m].
Var pick(Var a, std::span<const std::size_t> index);
// Sum over rows of -log softmax(logits)(i, target[i]). Scalar.
Var cross_entropy(Var logits, std::span<const std::size_t> targets);

}  // namespace memetrn::ops
