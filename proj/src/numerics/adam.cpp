#include "gicisad/numerics/adam.hpp"

#include <algorithm>
#include <cmath>

#include "gicisad/errors.hpp"

namespace gicisad {

AdamState::AdamState(const ParamSet& params, AdamOptions options) : options_(options) {
  if (!(options.learning_rate > 0.0) || !(options.epsilon > 0.0) || options.beta1 < 0.0 ||
      options.beta1 >= 1.0 || options.beta2 < 0.0 || options.beta2 >= 1.0) {
    throw ConfigError("invalid Adam options");
  }
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamState::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  options_.learning_rate = lr;
}

void adam_step(ParamSet& params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw ContractViolation("optimizer state does not match parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.size() != state.m_[i].size()) {
      throw ContractViolation("shape mismatch for parameter '" + params[i].name + "'");
    }
    for (double g : params[i].tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient for parameter '" + params[i].name + "'");
      }
    }
  }
  const auto& o = state.options_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto grad = params[i].tensor.grad();
    if (std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; })) continue;
    auto values = params[i].tensor.mutable_values();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * grad[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      values[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
      if (!std::isfinite(values[j])) {
        throw NumericError("parameter '" + params[i].name + "' became non-finite");
      }
    }
  }
}

}  // namespace gicisad
