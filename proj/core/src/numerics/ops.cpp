#include "memetrn/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "memetrn/errors.hpp"

namespace memetrn::ops {
namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank2(const char* op, const Var& a) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 input, got " + shape_string(a.shape()));
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Elementwise unary op with derivative expressed through input and output.
template <class Fwd, class Deriv>
Var unary(const char* name, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(name, std::move(y), {a}, [ia, deriv](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& xv = t.value(ia);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(y), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    for (std::size_t id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(y), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(y), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv2 = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  require_rank2("add_bias", a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match columns of " +
                         shape_string(a.shape()));
  }
  Tensor y = a.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) y(r, c) += bv[c];
  }
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().record("add_bias", std::move(y), {a, bias}, [ia, ib, m, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
      }
    }
  });
}

Var scale(Var a, double factor) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(y), {a}, [ia, factor](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var add_scalar(Var a, double value) {
  Tensor y = a.value();
  for (double& v : y.data()) v += value;
  const std::size_t ia = a.id();
  return a.tape().record("add_scalar", std::move(y), {a}, [ia](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var matmul(Var a, Var b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor y({m, n});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = y.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(y), {a, b}, [ia, ib, m, k, n](Tape& t, const Tensor& g) {
    const double* G = g.data().data();
    if (t.requires_grad(ia)) {
      const double* B2 = t.value(ib).data().data();
      double* GA = t.grad_buffer(ia).data().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = G + i * n;
          const double* brow = B2 + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          GA[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad(ib)) {
      const double* A2 = t.value(ia).data().data();
      double* GB = t.grad_buffer(ib).data().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A2[i * k + p];
          const double* grow = G + i * n;
          double* gbrow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  require_rank2("transpose", a);
  const Tensor& av = a.value();
  const std::size_t m = av.shape()[0], n = av.shape()[1];
  Tensor y({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y(j, i) = av(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(y), {a}, [ia, m, n](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    }
  });
}

Var softmax(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis, "softmax");
  Tensor y(xv.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(xv[base + k * s.inner] - mx);
        y[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) y[base + k * s.inner] /= total;
    }
  }
  const std::size_t ix = x.id();
  const std::size_t iy = x.tape().size();
  return x.tape().record("softmax", std::move(y), {x}, [ix, iy, s](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ix)) return;
    const Tensor& yv = t.value(iy);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.extent; ++k) dot += g[base + k * s.inner] * yv[base + k * s.inner];
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          gx[i] += yv[i] * (g[i] - dot);
        }
      }
    }
  });
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = xv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < n; ++c) y(r, c) = row[c] - lse;
  }
  const std::size_t ix = x.id();
  const std::size_t iy = x.tape().size();
  return x.tape().record("log_softmax", std::move(y), {x}, [ix, iy, m, n](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ix)) return;
    const Tensor& yv = t.value(iy);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < m; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < n; ++c) gsum += g[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += g[r * n + c] - std::exp(yv[r * n + c]) * gsum;
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                         shape_string(bias.shape()) + " do not match last axis of " + shape_string(xv.shape()));
  }
  if (!(eps > 0.0)) throw InputError("layer_norm: eps must be positive");
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor y(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = xv.row(r);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (row[c] - mu) * inv_std[r];
      y(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      "layer_norm", std::move(y), {x, gain, bias},
      [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad_buffer(ig);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * xhat[r * n + c];
          }
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
          }
        }
        if (t.requires_grad(ix)) {
          const Tensor& gv2 = t.value(ig);
          Tensor& gx = t.grad_buffer(ix);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < m; ++r) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double d = g[r * n + c] * gv2[c];
              sum_d += d;
              sum_dx += d * xhat[r * n + c];
            }
            for (std::size_t c = 0; c < n; ++c) {
              const double d = g[r * n + c] * gv2[c];
              gx[r * n + c] += inv_std[r] * (d - inv_n * sum_d - xhat[r * n + c] * inv_n * sum_dx);
            }
          }
        }
      });
}

Var embedding_lookup(Var table, std::span<const std::size_t> ids) {
  require_rank2("embedding_lookup", table);
  const Tensor& tv = table.value();
  const std::size_t vocab = tv.shape()[0], d = tv.shape()[1];
  Tensor y({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[r]) + " out of range for table of " +
                       std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.row(ids[r]).begin(), d, y.row(r).begin());
  }
  const std::size_t it = table.id();
  return table.tape().record("embedding_lookup", std::move(y), {table},
                             [it, d, idv = std::vector<std::size_t>(ids.begin(), ids.end())](
                                 Tape& t, const Tensor& g) {
                               if (!t.requires_grad(it)) return;
                               Tensor& gt = t.grad_buffer(it);
                               for (std::size_t r = 0; r < idv.size(); ++r) {
                                 for (std::size_t c = 0; c < d; ++c) gt[idv[r] * d + c] += g[r * d + c];
                               }
                             });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw InputError("concat: no inputs");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  split_axis(first, axis, "concat");
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: shape mismatch " + shape_string(first) + " vs " + shape_string(s) +
                           " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis, "concat");
  Tensor y(out_shape);
  std::vector<std::size_t> ids, offsets, extents;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t ext = pv.shape()[axis];
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pv.data().begin() + o * ext * os.inner, ext * os.inner,
                  y.data().begin() + (o * os.extent + offset) * os.inner);
    }
    ids.push_back(p.id());
    offsets.push_back(offset);
    extents.push_back(ext);
    offset += ext;
  }
  return parts.front().tape().record(
      "concat", std::move(y), parts,
      [ids = std::move(ids), offsets = std::move(offsets), extents = std::move(extents), os](Tape& t,
                                                                                           const Tensor& g) {
        for (std::size_t p = 0; p < ids.size(); ++p) {
          if (!t.requires_grad(ids[p])) continue;
          Tensor& gp = t.grad_buffer(ids[p]);
          const std::size_t ext = extents[p];
          for (std::size_t o = 0; o < os.outer; ++o) {
            const double* src = g.data().data() + (o * os.extent + offsets[p]) * os.inner;
            double* dst = gp.data().data() + o * ext * os.inner;
            for (std::size_t i = 0; i < ext * os.inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  const AxisSplit s = split_axis(av.shape(), axis, "slice");
  if (begin > end || end > s.extent) {
    throw IndexError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis extent " + std::to_string(s.extent));
  }
  Shape out_shape = av.shape();
  out_shape[axis] = end - begin;
  const std::size_t ext = end - begin;
  Tensor y(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(av.data().begin() + (o * s.extent + begin) * s.inner, ext * s.inner,
                y.data().begin() + o * ext * s.inner);
  }
  const std::size_t ia = a.id();
  return a.tape().record("slice", std::move(y), {a}, [ia, s, begin, ext](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = g.data().data() + o * ext * s.inner;
      double* dst = ga.data().data() + (o * s.extent + begin) * s.inner;
      for (std::size_t i = 0; i < ext * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Var gelu(Var a) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [inv_sqrt_2pi](double x) {
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
      });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var dropout(Var a, double p) {
  Tape& tape = a.tape();
  if (!tape.training() || p <= 0.0) return a;
  if (p >= 1.0) throw InputError("dropout: probability must be < 1");
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(a.shape());
  for (double& m : mask.data()) m = tape.dropout_rng().uniform() < p ? 0.0 : keep_scale;
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  const std::size_t ia = a.id();
  return tape.record("dropout", std::move(y), {a}, [ia, mask = std::move(mask)](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var masked_fill(Var a, const Tensor& mask, double value) {
  if (mask.shape() != a.shape()) {
    throw DimensionError("masked_fill: mask " + shape_string(mask.shape()) + " vs input " +
                         shape_string(a.shape()));
  }
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mask[i] == 0.0) y[i] = value;
  }
  const std::size_t ia = a.id();
  return a.tape().record("masked_fill", std::move(y), {a}, [ia, mask](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (mask[i] != 0.0) ga[i] += g[i];
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(total), {a}, [ia](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (double& v : ga.data()) v += g[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw InputError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mean_rows(Var a) {
  require_rank2("mean_rows", a);
  const Tensor& av = a.value();
  const std::size_t m = av.shape()[0], n = av.shape()[1];
  if (m == 0) throw InputError("mean_rows: no rows");
  Tensor y({1, n});
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) y[c] += av(r, c);
  }
  for (double& v : y.data()) v /= static_cast<double>(m);
  const std::size_t ia = a.id();
  return a.tape().record("mean_rows", std::move(y), {a}, [ia, m, n](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    const double w = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[c] * w;
    }
  });
}

Var pick(Var a, std::span<const std::size_t> index) {
  require_rank2("pick", a);
  const Tensor& av = a.value();
  const std::size_t m = av.shape()[0], n = av.shape()[1];
  if (index.size() != m) {
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " + shape_string(av.shape()));
  }
  Tensor y({m});
  for (std::size_t r = 0; r < m; ++r) {
    if (index[r] >= n) {
      throw IndexError("pick: index " + std::to_string(index[r]) + " out of range for " + std::to_string(n) +
                       " columns");
    }
    y[r] = av(r, index[r]);
  }
  const std::size_t ia = a.id();
  return a.tape().record("pick", std::move(y), {a},
                         [ia, n, idx = std::vector<std::size_t>(index.begin(), index.end())](Tape& t,
                                                                                            const Tensor& g) {
                           if (!t.requires_grad(ia)) return;
                           Tensor& ga = t.grad_buffer(ia);
                           for (std::size_t r = 0; r < idx.size(); ++r) ga[r * n + idx[r]] += g[r];
                         });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  require_rank2("cross_entropy", logits);
  const Tensor& lv = logits.value();
  const std::size_t m = lv.shape()[0], n = lv.shape()[1];
  if (targets.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_string(lv.shape()));
  }
  Tensor probs({m, n});
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (targets[r] >= n) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[r]) + " out of range for " +
                       std::to_string(n) + " classes");
    }
    const auto row = lv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      probs(r, c) = std::exp(row[c] - mx);
      total += probs(r, c);
    }
    for (std::size_t c = 0; c < n; ++c) probs(r, c) /= total;
    loss -= (row[targets[r]] - mx) - std::log(total);
  }
  const std::size_t il = logits.id();
  return logits.tape().record(
      "cross_entropy", Tensor::scalar(loss), {logits},
      [il, m, n, probs = std::move(probs), tg = std::vector<std::size_t>(targets.begin(), targets.end())](
          Tape& t, const Tensor& g) {
        if (!t.requires_grad(il)) return;
        Tensor& gl = t.grad_buffer(il);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < n; ++c) {
            gl[r * n + c] += g[0] * (probs(r, c) - (c == tg[r] ? 1.0 : 0.0));
          }
        }
      });
}

}  // namespace memetrn::ops
