#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gicisad/pipeline/model.hpp"
#include "gicisad/pose/data.hpp"
#include "gicisad/pose/windows.hpp"

namespace gicisad::pipeline {

/// A normalized window ready for the model. past is l x J x C, future is
/// (L - l) x J x C.
struct PreparedWindow {
  pose::WindowOrigin origin;
  std::vector<double> past;
  std::vector<double> future;
  pose::NormalizationRecord normalization;
};

std::vector<PreparedWindow> prepare_windows(const pose::PoseDataset& dataset, const TrainConfig& config);

/// lambda1 (graph + lambda2 puzzle) + diffusion.
double total_loss(double graph, double puzzle, double diffusion, double lambda1, double lambda2);
Tensor total_loss(const Tensor& graph, const Tensor& puzzle, const Tensor& diffusion, double lambda1,
                  double lambda2);

struct LossTerms {
  Tensor graph;
  Tensor puzzle;
  Tensor diffusion;
  Tensor total;
  jigsaw::PuzzleMove move;
  std::vector<std::size_t> steps;
};

/// One training forward pass over a batch: adjacency from V, one puzzle
/// move, attention and heads, corruption at a drawn step, noise prediction.
/// Every random draw comes from `rng`, so equal streams give equal losses.
LossTerms batch_loss(const Model& model, std::span<const PreparedWindow* const> batch, RngStream rng);

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t batches = 0;
  double total = 0.0;
  double graph = 0.0;
  double puzzle = 0.0;
  double diffusion = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam over shuffled mini-batches for config.epochs epochs. Throws
/// ConfigError when there are no windows and NumericError (with epoch and
/// batch) when the loss or a gradient stops being finite.
TrainResult train(const std::vector<PreparedWindow>& windows, std::size_t joints, std::size_t channels,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});
TrainResult train(const pose::PoseDataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// CSV with header epoch,total,graph,puzzle,diffusion.
std::string format_loss_history(const std::vector<EpochStats>& history);

}  // namespace gicisad::pipeline
