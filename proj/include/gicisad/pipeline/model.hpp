#pragma once

#include <filesystem>
#include <memory>

#include "gicisad/diffusion/denoiser.hpp"
#include "gicisad/diffusion/schedule.hpp"
#include "gicisad/forecaster/forecaster.hpp"
#include "gicisad/numerics/checkpoint.hpp"
#include "gicisad/pipeline/config.hpp"

namespace gicisad::pipeline {

/// Forecaster (theta) and denoiser (psi) built from one config. Parameter
/// names: graph.*, forecast.*, condition.*, puzzle.* and denoiser.*.
class Model {
 public:
  Model(const TrainConfig& config, std::size_t joints, std::size_t channels);

  const TrainConfig& config() const noexcept { return config_; }
  std::size_t joints() const noexcept { return joints_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t future_frames() const noexcept { return config_.window_length - config_.past_frames; }

  forecaster::Forecaster& forecaster() noexcept { return *forecaster_; }
  const forecaster::Forecaster& forecaster() const noexcept { return *forecaster_; }
  const diffusion::Denoiser& denoiser() const noexcept { return *denoiser_; }
  const diffusion::DiffusionSchedule& schedule() const noexcept { return schedule_; }

  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  /// Graph built from the current embeddings.
  graph::Adjacency adjacency() const;

  /// Throws NumericError naming the first non-finite parameter.
  void require_finite() const;

 private:
  TrainConfig config_;
  std::size_t joints_;
  std::size_t channels_;
  std::unique_ptr<forecaster::Forecaster> forecaster_;
  std::unique_ptr<diffusion::Denoiser> denoiser_;
  diffusion::DiffusionSchedule schedule_;
  ParamSet params_;
};

/// Config text followed by `joints` and `channels` lines.
std::string model_metadata(const Model& model);

void save_model(const std::filesystem::path& path, const Model& model);
/// Rebuilds the model described by the metadata and loads its parameters.
std::unique_ptr<Model> load_model(const std::filesystem::path& path);
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace gicisad::pipeline
