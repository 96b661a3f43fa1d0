#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gicisad/numerics/params.hpp"

namespace gicisad {

struct GradCheckOptions {
  double eps = 1e-6;
  /// Denominator floor of the relative error, so exactly-zero gradients
  /// compare on an absolute scale.
  double floor = 1e-8;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error() const;
  const GradCheckEntry* worst() const;
};

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences for every scalar of every parameter. The relative error of
/// one scalar is |a - n| / max(|a|, |n|, floor). `loss_fn` must rebuild the
/// graph from scratch on each call and be deterministic.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParamSet& params,
                           GradCheckOptions options = {});

}  // namespace gicisad
