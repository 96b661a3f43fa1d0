#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "gicisad/diffusion/schedule.hpp"
#include "gicisad/jigsaw/jigsaw.hpp"
#include "gicisad/pose/windows.hpp"

namespace gicisad::pipeline {

enum class Aggregation { kMin, kMean, kMedian, kMax };
enum class GraphLossTarget { kFuture, kPast };
enum class ScoreTransform { kSmooth, kRaw };
enum class TimestepSampling { kPerBatch, kPerSample };

Aggregation parse_aggregation(const std::string& name);
std::string to_string(Aggregation a);
GraphLossTarget parse_graph_loss_target(const std::string& name);
std::string to_string(GraphLossTarget t);
ScoreTransform parse_score_transform(const std::string& name);
std::string to_string(ScoreTransform t);
TimestepSampling parse_timestep_sampling(const std::string& name);
std::string to_string(TimestepSampling s);

/// Every knob of training and scoring. Text form is flat `key = value`
/// with the member names below as keys; unknown keys are rejected.
struct TrainConfig {
  double lambda1 = 0.01;
  double lambda2 = 1.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;
  std::size_t epochs = 30;
  std::size_t window_length = 6;  // L
  std::size_t past_frames = 3;    // l
  std::size_t stride = 1;
  std::size_t embed_dim = 16;     // D
  std::size_t degree = 5;         // delta
  std::size_t subgraphs = 5;      // eta
  std::size_t forecast_hidden = 128;
  std::size_t diffusion_steps = 10;  // T
  diffusion::ScheduleKind scheduler = diffusion::ScheduleKind::kCosine;
  double beta_start = 1e-4;
  double beta_end = 0.01;
  std::size_t generations = 50;   // M
  Aggregation aggregation = Aggregation::kMin;
  std::uint64_t seed = 0;
  bool puzzle_at_inference = true;
  bool use_puzzle = true;
  bool use_graph_loss = true;
  jigsaw::PuzzleKind puzzle_kind = jigsaw::PuzzleKind::kInter;
  GraphLossTarget graph_loss_target = GraphLossTarget::kFuture;
  diffusion::PosteriorVariance posterior_variance = diffusion::PosteriorVariance::kBeta;
  ScoreTransform score_transform = ScoreTransform::kSmooth;
  TimestepSampling timestep_sampling = TimestepSampling::kPerBatch;
  pose::NormalizePolicy normalize = pose::NormalizePolicy::kCenterScale;
  std::array<std::size_t, 6> denoiser_channels{32, 32, 64, 64, 128, 64};
  std::size_t pooled_joints = 10;
  std::size_t time_embed_dim = 16;
  std::size_t time_hidden = 32;
  /// Scoring workers; 0 means one per hardware thread.
  std::size_t threads = 1;
};

/// Throws ConfigError on out-of-range values.
void validate(const TrainConfig& config);

TrainConfig parse_train_config(const std::string& text);
std::string format_train_config(const TrainConfig& config);
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace gicisad::pipeline
