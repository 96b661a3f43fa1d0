#include "gicisad/diffusion/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "gicisad/errors.hpp"
#include "gicisad/pose/data.hpp"

namespace gicisad::diffusion {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "cosine") return ScheduleKind::kCosine;
  if (name == "linear") return ScheduleKind::kLinear;
  throw ConfigError("unknown scheduler '" + name + "' (expected cosine or linear)");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kCosine: return "cosine";
    case ScheduleKind::kLinear: return "linear";
    case ScheduleKind::kCustom: return "custom";
  }
  return "?";
}

PosteriorVariance parse_posterior_variance(const std::string& name) {
  if (name == "beta") return PosteriorVariance::kBeta;
  if (name == "beta_bar") return PosteriorVariance::kBetaBar;
  throw ConfigError("unknown posterior variance '" + name + "' (expected beta or beta_bar)");
}

std::string to_string(PosteriorVariance variance) {
  return variance == PosteriorVariance::kBeta ? "beta" : "beta_bar";
}

double DiffusionSchedule::beta_bar(std::size_t t) const {
  return (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
}

DiffusionSchedule build_schedule(ScheduleKind kind, std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw ConfigError("diffusion steps must be at least 1");
  if (kind == ScheduleKind::kCustom) throw ConfigError("custom schedules come from schedule_from_betas");
  DiffusionSchedule s;
  s.kind_ = kind;
  s.beta_.resize(steps);
  if (kind == ScheduleKind::kLinear) {
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
      throw ConfigError("linear schedule needs 0 < beta_start <= beta_end < 1");
    }
    for (std::size_t i = 0; i < steps; ++i) {
      s.beta_[i] = steps == 1 ? beta_start
                              : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                                 static_cast<double>(steps - 1);
    }
    s.beta_.back() = beta_end;
  } else {
    const double total = static_cast<double>(steps);
    auto f = [&](double t) {
      const double c = std::cos((t / total + kCosineOffset) / (1.0 + kCosineOffset) * std::numbers::pi / 2);
      return c * c;
    };
    const double f0 = f(0.0);
    for (std::size_t t = 1; t <= steps; ++t) {
      const double prev = f(static_cast<double>(t - 1)) / f0;
      const double cur = f(static_cast<double>(t)) / f0;
      s.beta_[t - 1] = std::min(1.0 - cur / prev, kMaxBeta);
    }
  }
  s.alpha_bar_.assign(steps + 1, 1.0);
  for (std::size_t t = 1; t <= steps; ++t) s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t - 1]);
  return s;
}

DiffusionSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("diffusion steps must be at least 1");
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("every beta must lie in (0, 1)");
  }
  DiffusionSchedule s;
  s.kind_ = ScheduleKind::kCustom;
  s.beta_ = std::move(betas);
  s.alpha_bar_.assign(s.beta_.size() + 1, 1.0);
  for (std::size_t t = 1; t <= s.beta_.size(); ++t) s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t - 1]);
  return s;
}

std::string format_schedule(const DiffusionSchedule& schedule) {
  std::ostringstream out;
  out << "# scheduler " << to_string(schedule.kind()) << " T=" << schedule.steps() << "\n";
  out << "t,beta,alpha,alpha_bar,beta_bar\n";
  for (std::size_t t = 1; t <= schedule.steps(); ++t) {
    out << t << "," << pose::format_number(schedule.beta(t)) << "," << pose::format_number(schedule.alpha(t))
        << "," << pose::format_number(schedule.alpha_bar(t)) << ","
        << pose::format_number(schedule.beta_bar(t)) << "\n";
  }
  return out.str();
}

std::vector<double> forward_corrupt(std::span<const double> x, std::size_t t, std::span<const double> eps,
                                    const DiffusionSchedule& schedule) {
  if (x.size() != eps.size()) throw ContractViolation("forward_corrupt: noise shape mismatch");
  if (t > schedule.steps()) throw ContractViolation("forward_corrupt: step outside the schedule");
  const double a = std::sqrt(schedule.alpha_bar(t)), b = std::sqrt(1.0 - schedule.alpha_bar(t));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * eps[i];
  return out;
}

Tensor forward_corrupt(const Tensor& x, std::size_t t, const Tensor& eps, const DiffusionSchedule& schedule) {
  if (x.shape() != eps.shape()) throw ContractViolation("forward_corrupt: noise shape mismatch");
  return Tensor(x.shape(), forward_corrupt(x.values(), t, eps.values(), schedule));
}

std::vector<double> forward_step(std::span<const double> x, std::size_t t, std::span<const double> eps,
                                 const DiffusionSchedule& schedule) {
  if (x.size() != eps.size()) throw ContractViolation("forward_step: noise shape mismatch");
  const double a = std::sqrt(schedule.alpha(t)), b = std::sqrt(schedule.beta(t));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * eps[i];
  return out;
}

std::vector<double> reverse_step(std::span<const double> u, std::size_t t, std::span<const double> eps_hat,
                                 const DiffusionSchedule& schedule, std::span<const double> xi,
                                 PosteriorVariance variance) {
  if (t < 1 || t > schedule.steps()) throw ContractViolation("reverse_step: step outside the schedule");
  if (u.size() != eps_hat.size()) throw ContractViolation("reverse_step: prediction shape mismatch");
  const bool noisy = t > 1;
  if (noisy && xi.size() != u.size()) throw ContractViolation("reverse_step: noise shape mismatch");
  const double beta = schedule.beta(t);
  const double inv = 1.0 / std::sqrt(1.0 - beta);
  const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double sigma =
      noisy ? std::sqrt(variance == PosteriorVariance::kBeta ? beta : schedule.beta_bar(t)) : 0.0;
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = inv * (u[i] - coef * eps_hat[i]) + (noisy ? sigma * xi[i] : 0.0);
  }
  return out;
}

std::vector<double> timestep_embedding(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ContractViolation("timestep embedding dimension must be even");
  if (t < 0.0) throw ContractViolation("timestep must be non-negative");
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < dim / 2; ++i) {
    const double w = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    out[2 * i] = std::sin(t * w);
    out[2 * i + 1] = std::cos(t * w);
  }
  return out;
}

Tensor noise_norm(const Tensor& eps, const Tensor& eps_hat) {
  if (eps.shape() != eps_hat.shape() || eps.rank() == 0) {
    throw ContractViolation("diffusion_loss shape mismatch: " + shape_string(eps.shape()) + " vs " +
                            shape_string(eps_hat.shape()));
  }
  const std::size_t b = eps.dim(0);
  const Tensor sq = reshape(square(eps - eps_hat), {b, eps.size() / b});
  return mean(sqrt(sum_last(sq)));
}

Tensor diffusion_loss(const Tensor& eps, const Tensor& eps_hat) { return smooth_l1(noise_norm(eps, eps_hat)); }

}  // namespace gicisad::diffusion
