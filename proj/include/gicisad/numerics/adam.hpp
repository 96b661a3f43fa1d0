#pragma once

#include <cstdint>
#include <vector>

#include "gicisad/numerics/params.hpp"

namespace gicisad {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers mirroring a ParamSet.
class AdamState {
 public:
  AdamState(const ParamSet& params, AdamOptions options = {});

  const AdamOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr);
  std::uint64_t step_count() const noexcept { return step_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  friend void adam_step(ParamSet& params, AdamState& state);
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Bias-corrected Adam update using the gradients accumulated on `params`.
/// Parameters whose gradient is absent or identically zero are left
/// untouched, moments included; the step counter still advances.
/// Throws NumericError naming the parameter when a gradient is not finite.
void adam_step(ParamSet& params, AdamState& state);

}  // namespace gicisad
