#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace memetrn {

// Counter-based generator: draw i of stream s under seed k is a pure function
// of (k, s, i). std::mt19937 would be portable but its distributions are not,
// so uniform/normal are derived here from raw 64-bit words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
  // Stable 64-bit FNV-1a, used to derive stream ids from names.
  static std::uint64_t hash(std::string_view text);

  std::uint64_t next_u64() { return mix(seed_, stream_, counter_++); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream, e.g. one per sample id.
  Rng fork(std::uint64_t substream) const { return Rng(seed_, mix(stream_, substream, 0x5eed)); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace memetrn
