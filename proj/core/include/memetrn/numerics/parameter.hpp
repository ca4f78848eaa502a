#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "memetrn/numerics/rng.hpp"
#include "memetrn/numerics/tensor.hpp"

namespace memetrn {

// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

// Owns every parameter of a model under a dotted path name. Insertion order is
// preserved so checkpoints and optimizer state iterate deterministically.
// Parameters live behind unique_ptr: references stay valid while the store grows.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, Tensor init);
  // N(0, stddev^2) initialisation from a stream derived from the name.
  Parameter& add_normal(const std::string& name, Shape shape, double stddev, std::uint64_t seed);
  Parameter& add_constant(const std::string& name, Shape shape, double value);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  // Copies values (not grads) from another store with identical names/shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace memetrn
