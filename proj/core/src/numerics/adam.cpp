#include "memetrn/numerics/adam.hpp"

#include <algorithm>
#include <cmath>

#include "memetrn/errors.hpp"

namespace memetrn {

double LrSchedule::at(std::int64_t step) const {
  double lr = base_lr;
  if (kind == Kind::LinearDecay && total_steps > 1) {
    const double frac =
        std::clamp(static_cast<double>(step - 1) / static_cast<double>(total_steps - 1), 0.0, 1.0);
    lr = base_lr + (final_lr - base_lr) * frac;
  }
  if (warmup_steps > 0 && step <= warmup_steps) {
    lr *= static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  return lr;
}

double Adam::step(ParameterStore& params) {
  ++t_;
  const double lr = options_.schedule.at(t_);
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));

  double grad_scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : std::as_const(params).all()) {
      for (double g : p->grad.data()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) grad_scale = options_.clip_norm / norm;
  }

  for (Parameter* p : params.all()) {
    if (p->grad.shape() != p->value.shape()) {
      throw DimensionError("adam: gradient " + shape_string(p->grad.shape()) + " vs parameter " + p->name + " " +
                           shape_string(p->value.shape()));
    }
    auto [it, inserted] = moments_.try_emplace(p->name);
    Moments& mo = it->second;
    if (inserted) {
      mo.m = Tensor::zeros(p->value.shape());
      mo.v = Tensor::zeros(p->value.shape());
    } else if (mo.m.shape() != p->value.shape()) {
      throw DimensionError("adam: moment shape changed for " + p->name);
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i] * grad_scale;
      mo.m[i] = options_.beta1 * mo.m[i] + (1.0 - options_.beta1) * g;
      mo.v[i] = options_.beta2 * mo.v[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
  return lr;
}

}  // namespace memetrn
