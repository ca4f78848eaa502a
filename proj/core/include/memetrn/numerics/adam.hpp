#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "memetrn/numerics/parameter.hpp"

namespace memetrn {

struct LrSchedule {
  enum class Kind { Constant, LinearDecay };

  Kind kind = Kind::Constant;
  double base_lr = 1e-3;
  // LinearDecay: lr goes from base_lr at step 1 to final_lr at total_steps,
  // then stays at final_lr.
  double final_lr = 0.0;
  std::int64_t total_steps = 1;
  // Linear ramp from 0 over the first warmup_steps steps.
  std::int64_t warmup_steps = 0;

  double at(std::int64_t step) const;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  LrSchedule schedule;
};

// Bias-corrected Adam over a ParameterStore. Moments are keyed by parameter
// name and created on first use with the parameter's shape.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // One update using Parameter::grad; increments step() by exactly one.
  // Returns the learning rate that was applied.
  double step(ParameterStore& params);

  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }
  const Tensor& first_moment(const std::string& name) const { return moments_.at(name).m; }
  const Tensor& second_moment(const std::string& name) const { return moments_.at(name).v; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  AdamOptions options_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace memetrn
