#pragma once

#include <string>
#include <vector>

#include "gicisad/numerics/rng.hpp"
#include "gicisad/numerics/tensor.hpp"

namespace gicisad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered collection of trainable leaves. Order is registration order and
/// is what the optimizer, the checkpoint writer and grad_check iterate in.
class ParamSet {
 public:
  /// Registers a new parameter leaf and returns a handle sharing its storage.
  Tensor add(std::string name, Shape shape, std::vector<double> values);
  void append(const ParamSet& other, const std::string& prefix = "");

  std::size_t size() const noexcept { return items_.size(); }
  const NamedTensor& operator[](std::size_t i) const { return items_[i]; }
  NamedTensor& operator[](std::size_t i) { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }

  /// Null when absent.
  const NamedTensor* find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedTensor> items_;
};

/// n draws from U(-bound, bound).
std::vector<double> uniform_values(std::size_t n, double bound, RngStream& rng);

}  // namespace gicisad
