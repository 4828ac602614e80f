#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcount/tensor.hpp"

namespace lcount {

/// Ordered collection of named trainable leaf tensors.
class ParameterSet {
 public:
  /// Registers a zero-filled parameter. Names must be unique.
  Tensor& add(const std::string& name, Shape shape);
  /// Registers a parameter drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor& add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                      std::mt19937_64& rng);

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lcount
