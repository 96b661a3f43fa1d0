#include "gicisad/pipeline/model.hpp"

#include <cmath>
#include <sstream>

#include "gicisad/errors.hpp"
#include "gicisad/keyvalue.hpp"

namespace gicisad::pipeline {

Model::Model(const TrainConfig& config, std::size_t joints, std::size_t channels)
    : config_(config), joints_(joints), channels_(channels) {
  validate(config_);
  if (joints < 2 || channels == 0) throw ConfigError("need at least two joints and one channel");
  if (config_.degree >= joints) {
    throw ConfigError("degree " + std::to_string(config_.degree) + " must be below the joint count " +
                      std::to_string(joints));
  }
  if (config_.subgraphs > joints) throw ConfigError("subgraphs cannot exceed the joint count");
  if (config_.pooled_joints > joints) throw ConfigError("pooled_joints cannot exceed the joint count");

  RngStream root(config_.seed);
  forecaster::ForecasterConfig fc;
  fc.joints = joints;
  fc.embed_dim = config_.embed_dim;
  fc.channels = channels;
  fc.past_frames = config_.past_frames;
  fc.hidden = config_.forecast_hidden;
  fc.puzzle_classes = jigsaw::class_count(config_.puzzle_kind, config_.subgraphs);
  auto f_rng = root.split(1);
  forecaster_ = std::make_unique<forecaster::Forecaster>(fc, f_rng);

  diffusion::DenoiserConfig dc;
  dc.joints = joints;
  dc.channels = channels;
  dc.frames = future_frames();
  dc.condition_dim = config_.embed_dim;
  dc.channel_plan = config_.denoiser_channels;
  dc.pooled_joints = config_.pooled_joints;
  dc.time_embed_dim = config_.time_embed_dim;
  dc.time_hidden = config_.time_hidden;
  auto d_rng = root.split(2);
  denoiser_ = std::make_unique<diffusion::Denoiser>(dc, d_rng);

  schedule_ = diffusion::build_schedule(config_.scheduler, config_.diffusion_steps, config_.beta_start,
                                        config_.beta_end);
  params_.append(forecaster_->params());
  params_.append(denoiser_->params(), "denoiser.");
}

graph::Adjacency Model::adjacency() const { return forecaster_->adjacency(config_.degree); }

void Model::require_finite() const {
  for (const auto& p : params_) {
    for (double v : p.tensor.values()) {
      if (!std::isfinite(v)) throw NumericError("parameter '" + p.name + "' holds a non-finite value");
    }
  }
}

std::string model_metadata(const Model& model) {
  std::ostringstream out;
  out << format_train_config(model.config());
  out << "joints = " << model.joints() << "\n";
  out << "channels = " << model.channels() << "\n";
  return out.str();
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_checkpoint(path, model.params(), model_metadata(model));
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt) {
  std::string config_text;
  std::istringstream in(ckpt.metadata);
  std::string line;
  std::int64_t joints = -1, channels = -1;
  while (std::getline(in, line)) {
    if (line.rfind("joints", 0) == 0 || line.rfind("channels", 0) == 0) {
      const KeyValues kv = KeyValues::parse(line);
      joints = kv.get_int("joints", joints);
      channels = kv.get_int("channels", channels);
    } else {
      config_text += line + "\n";
    }
  }
  if (joints <= 0 || channels <= 0) throw DataError("checkpoint metadata lacks joints/channels");
  auto model = std::make_unique<Model>(parse_train_config(config_text), static_cast<std::size_t>(joints),
                                       static_cast<std::size_t>(channels));
  load_parameters(ckpt, model->params());
  return model;
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  return model_from_checkpoint(read_checkpoint(path));
}

}  // namespace gicisad::pipeline
