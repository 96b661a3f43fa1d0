#include "gicisad/numerics/params.hpp"

#include "gicisad/errors.hpp"

namespace gicisad {

Tensor ParamSet::add(std::string name, Shape shape, std::vector<double> values) {
  if (find(name)) throw ContractViolation("duplicate parameter name '" + name + "'");
  Tensor t(std::move(shape), std::move(values), true);
  items_.push_back({std::move(name), t});
  return t;
}

void ParamSet::append(const ParamSet& other, const std::string& prefix) {
  for (const auto& item : other) {
    if (find(prefix + item.name)) {
      throw ContractViolation("duplicate parameter name '" + prefix + item.name + "'");
    }
    items_.push_back({prefix + item.name, item.tensor});
  }
}

const NamedTensor* ParamSet::find(const std::string& name) const {
  for (const auto& item : items_)
    if (item.name == name) return &item;
  return nullptr;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& item : items_) n += item.tensor.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& item : items_) item.tensor.zero_grad();
}

std::vector<double> uniform_values(std::size_t n, double bound, RngStream& rng) {
  std::vector<double> out(n);
  for (double& x : out) x = (2.0 * rng.uniform() - 1.0) * bound;
  return out;
}

}  // namespace gicisad
