#include "memetrn/numerics/parameter.hpp"

#include "memetrn/errors.hpp"

namespace memetrn {

Parameter& ParameterStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw InputError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor::zeros(init.shape());
  p->value = std::move(init);
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::add_normal(const std::string& name, Shape shape, double stddev,
                                      std::uint64_t seed) {
  Rng rng(seed, Rng::hash(name));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = stddev * rng.normal();
  return add(name, std::move(t));
}

Parameter& ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value));
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown parameter: " + name);
  return *params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (auto& p : params_) {
    const Parameter& src = other.at(p->name);
    if (src.value.shape() != p->value.shape()) {
      throw DimensionError("parameter " + p->name + ": " + shape_string(src.value.shape()) + " vs " +
                           shape_string(p->value.shape()));
    }
    p->value = src.value;
  }
}

}  // namespace memetrn
