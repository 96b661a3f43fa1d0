#include "gicisad/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gicisad/errors.hpp"

namespace gicisad {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

const GradCheckEntry* GradCheckReport::worst() const {
  const GradCheckEntry* w = nullptr;
  for (const auto& e : entries)
    if (!w || e.max_rel_error > w->max_rel_error) w = &e;
  return w;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParamSet& params,
                           GradCheckOptions options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw ContractViolation("grad_check eps must lie in [1e-7, 1e-3]");
  }
  params.zero_grad();
  const Tensor loss = loss_fn();
  const double base = loss.item();
  {
    NoGradGuard no_grad;
    const double again = loss_fn().item();
    if (again != base) {
      throw NumericError("grad_check aborted: loss is not deterministic (" +
                         std::to_string(base) + " vs " + std::to_string(again) + ")");
    }
  }
  loss.backward();

  GradCheckReport report;
  NoGradGuard no_grad;
  for (auto& p : params) {
    GradCheckEntry entry{p.name};
    const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto values = p.tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.eps;
      const double up = loss_fn().item();
      values[i] = original - options.eps;
      const double down = loss_fn().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      if (i == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  params.zero_grad();
  return report;
}

}  // namespace gicisad
