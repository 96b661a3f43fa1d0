#pragma once

#include <span>
#include <vector>

#include "gicisad/pipeline/train.hpp"

namespace gicisad::pipeline {

struct ScoreRecord {
  pose::WindowOrigin origin;
  std::vector<double> generation_scores;  // S_1 .. S_M
  double aggregate = 0.0;
  Aggregation strategy = Aggregation::kMin;
};

/// Median of an even count is the mean of the two central values. Throws
/// ContractViolation on empty input.
double aggregate_scores(std::span<const double> scores, Aggregation strategy);

/// mean + ln((1 + max) / (1 + min)). Throws ContractViolation on empty input.
double multi_actor_score(std::span<const double> per_actor);

/// Condition from the past frames (puzzle applied when configured), M
/// reverse-process samples from rng.split(1 + m), and the per-sample error
/// of the true future against each sample.
ScoreRecord score_window(const Model& model, const PreparedWindow& window, std::size_t generations,
                         Aggregation strategy, RngStream rng);

/// Window i uses RngStream(seed).split(i); the result does not depend on
/// the thread count.
std::vector<ScoreRecord> score_windows(const Model& model, const std::vector<PreparedWindow>& windows,
                                       std::size_t generations, Aggregation strategy, std::uint64_t seed,
                                       std::size_t threads = 1);

/// Re-aggregates stored generation scores with another strategy.
std::vector<ScoreRecord> reaggregate(std::vector<ScoreRecord> records, Aggregation strategy);

}  // namespace gicisad::pipeline
