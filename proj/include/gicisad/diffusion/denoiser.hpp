#pragma once

#include <array>
#include <utility>
#include <vector>

#include "gicisad/diffusion/schedule.hpp"
#include "gicisad/numerics/params.hpp"
#include "gicisad/numerics/rng.hpp"

namespace gicisad::diffusion {

struct DenoiserConfig {
  std::size_t joints = 17;          // J
  std::size_t channels = 2;         // C
  std::size_t frames = 3;           // L - l
  std::size_t condition_dim = 16;   // D
  std::array<std::size_t, 6> channel_plan{32, 32, 64, 64, 128, 64};
  std::size_t pooled_joints = 10;   // J'
  std::size_t time_embed_dim = 16;
  std::size_t time_hidden = 32;
};

/// Bones used to seed the spatial mixing: the COCO skeleton for 17 joints,
/// a chain otherwise.
std::vector<std::pair<std::size_t, std::size_t>> skeleton_bones(std::size_t joints);

/// D^-1/2 (A + I) D^-1/2 for the given undirected bones.
std::vector<double> normalized_skeleton(std::size_t joints,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& bones);

/// U-shaped stack of spatio-temporal graph blocks predicting the noise in a
/// B x F x J x C block. Each block mixes joints with a learnable J x J
/// matrix (seeded from the skeleton), mixes frames with a learnable F x F
/// matrix (seeded with the identity), maps channels linearly, adds a
/// per-channel projection of f(t) ++ condition, and applies LeakyReLU(0.2)
/// with a residual when the width is unchanged. Blocks 1-2 run on all
/// joints, a learnable J' x J map pools to blocks 3-6, a J x J' map
/// unpools, and the first skip is concatenated before the output layer.
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& config, RngStream& rng);

  const DenoiserConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  /// f(t) for each sample: B x time_hidden.
  Tensor time_features(const std::vector<std::size_t>& steps) const;

  /// noisy: B x F x J x C, steps: B entries, condition: B x D.
  Tensor predict(const Tensor& noisy, const std::vector<std::size_t>& steps, const Tensor& condition) const;

 private:
  struct Block {
    Tensor spatial, temporal, weight, bias, cond;
    bool residual = false;
  };
  Block make_block(const std::string& name, std::size_t joints, std::size_t in, std::size_t out,
                   const std::vector<double>& spatial_init, RngStream& rng);
  Tensor run_block(const Block& block, const Tensor& x, const Tensor& cond) const;

  DenoiserConfig config_;
  ParamSet params_;
  Tensor time_w1_, time_b1_, time_w2_, time_b2_;
  std::vector<Block> blocks_;
  Tensor pool_, unpool_;
  Tensor out_w_, out_b_;
};

/// Draws u_T from `rng`, then runs the reverse chain T..1 using a fresh
/// normal draw for xi at every step t > 1. `condition` is 1 x D; the
/// result is F x J x C. Same as sample_futures with a single stream.
std::vector<double> sample_future(const Denoiser& denoiser, const Tensor& condition,
                                  const DiffusionSchedule& schedule, RngStream& rng,
                                  PosteriorVariance variance = PosteriorVariance::kBeta);

/// M samples batched through the denoiser, sample m drawing only from
/// streams[m]. Result is M x F x J x C.
std::vector<double> sample_futures(const Denoiser& denoiser, const Tensor& condition,
                                   const DiffusionSchedule& schedule, std::vector<RngStream>& streams,
                                   PosteriorVariance variance = PosteriorVariance::kBeta);

}  // namespace gicisad::diffusion
