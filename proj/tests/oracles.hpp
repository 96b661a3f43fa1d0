#pragma once

// Independent reference computations shared by the test suites.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline double smooth_l1(double x) {
  const double a = std::fabs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

inline double binomial2(std::size_t n) { return static_cast<double>(n * (n - 1) / 2); }

/// Brute-force AUROC: fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
inline double pairwise_auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1;
      if (scores[i] > scores[j]) good += 1;
      else if (scores[i] == scores[j]) good += 0.5;
    }
  }
  return good / pairs;
}

}  // namespace oracle
