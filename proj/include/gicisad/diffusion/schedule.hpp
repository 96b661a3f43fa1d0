#pragma once

#include <span>
#include <string>
#include <vector>

#include "gicisad/numerics/tensor.hpp"

namespace gicisad::diffusion {

enum class ScheduleKind { kCosine, kLinear, kCustom };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Variance schedule over steps t = 1..T. Accessors take the step number;
/// alpha_bar(0) is 1.
class DiffusionSchedule {
 public:
  DiffusionSchedule() = default;

  ScheduleKind kind() const noexcept { return kind_; }
  std::size_t steps() const noexcept { return beta_.size(); }
  double beta(std::size_t t) const { return beta_.at(t - 1); }
  double alpha(std::size_t t) const { return 1.0 - beta(t); }
  double alpha_bar(std::size_t t) const { return alpha_bar_.at(t); }
  /// (1 - alpha_bar(t-1)) / (1 - alpha_bar(t)) * beta(t).
  double beta_bar(std::size_t t) const;

  const std::vector<double>& betas() const noexcept { return beta_; }

 private:
  friend DiffusionSchedule build_schedule(ScheduleKind, std::size_t, double, double);
  friend DiffusionSchedule schedule_from_betas(std::vector<double>);
  ScheduleKind kind_ = ScheduleKind::kCosine;
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;  // T + 1 entries
};

inline constexpr double kCosineOffset = 0.008;
inline constexpr double kMaxBeta = 0.999;

/// linear: T evenly spaced betas from beta_start to beta_end.
/// cosine: alpha_bar(t) = f(t) / f(0), f(t) = cos^2(((t/T + 0.008) / 1.008) pi/2),
/// beta = 1 - alpha_bar(t) / alpha_bar(t-1) capped at 0.999; the endpoints
/// are ignored. alpha_bar is then the running product of 1 - beta.
DiffusionSchedule build_schedule(ScheduleKind kind, std::size_t steps, double beta_start = 1e-4,
                                 double beta_end = 0.01);

/// Explicit betas, each in (0, 1); kind() reports kCustom.
DiffusionSchedule schedule_from_betas(std::vector<double> betas);

/// Table of t, beta, alpha, alpha_bar, beta_bar.
std::string format_schedule(const DiffusionSchedule& schedule);

/// sqrt(alpha_bar(t)) x + sqrt(1 - alpha_bar(t)) eps, for 0 <= t <= T.
std::vector<double> forward_corrupt(std::span<const double> x, std::size_t t,
                                    std::span<const double> eps, const DiffusionSchedule& schedule);
Tensor forward_corrupt(const Tensor& x, std::size_t t, const Tensor& eps,
                       const DiffusionSchedule& schedule);

/// One Markov step sqrt(1 - beta(t)) x + sqrt(beta(t)) eps.
std::vector<double> forward_step(std::span<const double> x, std::size_t t,
                                 std::span<const double> eps, const DiffusionSchedule& schedule);

enum class PosteriorVariance { kBeta, kBetaBar };

PosteriorVariance parse_posterior_variance(const std::string& name);
std::string to_string(PosteriorVariance variance);

/// u_{t-1} = (u_t - beta/sqrt(1 - alpha_bar) eps_hat) / sqrt(1 - beta) + sigma xi,
/// sigma = sqrt(beta(t)) or sqrt(beta_bar(t)); xi is ignored at t = 1.
std::vector<double> reverse_step(std::span<const double> u, std::size_t t,
                                 std::span<const double> eps_hat, const DiffusionSchedule& schedule,
                                 std::span<const double> xi,
                                 PosteriorVariance variance = PosteriorVariance::kBeta);

/// Interleaved [sin(t w_0), cos(t w_0), sin(t w_1), ...], w_i = 10000^(-2i/dim).
std::vector<double> timestep_embedding(double t, std::size_t dim);

/// Smooth-L1 of the batch mean of per-sample L2 norms of eps - eps_hat.
/// Axis 0 is the batch.
Tensor diffusion_loss(const Tensor& eps, const Tensor& eps_hat);
/// Batch mean of per-sample L2 norms (before the smooth transform).
Tensor noise_norm(const Tensor& eps, const Tensor& eps_hat);

}  // namespace gicisad::diffusion
