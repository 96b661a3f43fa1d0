#include "gicisad/diffusion/denoiser.hpp"

#include <cmath>

#include "gicisad/errors.hpp"
#include "gicisad/pose/synthetic.hpp"

namespace gicisad::diffusion {

namespace {

std::vector<double> uniform_init(std::size_t n, std::size_t fan_in, RngStream& rng) {
  return uniform_values(n, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

std::vector<double> identity(std::size_t n) {
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] = 1.0;
  return out;
}

// Contiguous groups of joints; pool averages a group, unpool copies it back.
std::vector<double> pool_init(std::size_t pooled, std::size_t joints, bool transpose) {
  std::vector<double> out(pooled * joints, 0.0);
  for (std::size_t g = 0; g < pooled; ++g) {
    const std::size_t lo = g * joints / pooled, hi = (g + 1) * joints / pooled;
    for (std::size_t j = lo; j < hi; ++j) {
      if (transpose) {
        out[j * pooled + g] = 1.0;
      } else {
        out[g * joints + j] = 1.0 / static_cast<double>(hi - lo);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> skeleton_bones(std::size_t joints) {
  if (joints == pose::kTemplateJoints) return pose::template_bones();
  std::vector<std::pair<std::size_t, std::size_t>> bones;
  for (std::size_t j = 0; j + 1 < joints; ++j) bones.emplace_back(j, j + 1);
  return bones;
}

std::vector<double> normalized_skeleton(std::size_t joints,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& bones) {
  std::vector<double> a = identity(joints);
  for (const auto& [u, v] : bones) {
    if (u >= joints || v >= joints) throw ContractViolation("bone references a missing joint");
    a[u * joints + v] = a[v * joints + u] = 1.0;
  }
  std::vector<double> deg(joints, 0.0);
  for (std::size_t i = 0; i < joints; ++i)
    for (std::size_t j = 0; j < joints; ++j) deg[i] += a[i * joints + j];
  for (std::size_t i = 0; i < joints; ++i)
    for (std::size_t j = 0; j < joints; ++j) a[i * joints + j] /= std::sqrt(deg[i] * deg[j]);
  return a;
}

Denoiser::Denoiser(const DenoiserConfig& config, RngStream& rng) : config_(config) {
  const auto& c = config_;
  if (c.joints == 0 || c.channels == 0 || c.frames == 0 || c.condition_dim == 0 || c.pooled_joints == 0 ||
      c.pooled_joints > c.joints || c.time_hidden == 0) {
    throw ConfigError("denoiser dimensions must be positive with pooled joints <= joints");
  }
  if (c.time_embed_dim == 0 || c.time_embed_dim % 2 != 0) {
    throw ConfigError("time embedding dimension must be a positive even number");
  }
  for (std::size_t w : c.channel_plan) {
    if (w == 0) throw ConfigError("denoiser channel widths must be positive");
  }

  auto t_rng = rng.split(1);
  time_w1_ = params_.add("time.w1", {c.time_embed_dim, c.time_hidden},
                         uniform_init(c.time_embed_dim * c.time_hidden, c.time_embed_dim, t_rng));
  time_b1_ = params_.add("time.b1", {c.time_hidden}, std::vector<double>(c.time_hidden, 0.0));
  time_w2_ = params_.add("time.w2", {c.time_hidden, c.time_hidden},
                         uniform_init(c.time_hidden * c.time_hidden, c.time_hidden, t_rng));
  time_b2_ = params_.add("time.b2", {c.time_hidden}, std::vector<double>(c.time_hidden, 0.0));

  const auto full = normalized_skeleton(c.joints, skeleton_bones(c.joints));
  const auto pooled = identity(c.pooled_joints);
  const auto& p = c.channel_plan;
  const std::array<std::size_t, 6> inputs{c.channels, p[0], p[1], p[2], p[3], p[4]};
  for (std::size_t i = 0; i < 6; ++i) {
    auto b_rng = rng.split(10 + i);
    const bool outer = i < 2;
    blocks_.push_back(make_block("block" + std::to_string(i + 1), outer ? c.joints : c.pooled_joints,
                                 inputs[i], p[i], outer ? full : pooled, b_rng));
  }
  pool_ = params_.add("pool", {c.pooled_joints, c.joints}, pool_init(c.pooled_joints, c.joints, false));
  unpool_ = params_.add("unpool", {c.joints, c.pooled_joints}, pool_init(c.pooled_joints, c.joints, true));

  auto o_rng = rng.split(20);
  const std::size_t merged = p[5] + p[1];
  out_w_ = params_.add("output.w", {merged, c.channels}, uniform_init(merged * c.channels, merged, o_rng));
  out_b_ = params_.add("output.b", {c.channels}, std::vector<double>(c.channels, 0.0));
}

Denoiser::Block Denoiser::make_block(const std::string& name, std::size_t joints, std::size_t in,
                                     std::size_t out, const std::vector<double>& spatial_init,
                                     RngStream& rng) {
  const std::size_t cond_dim = config_.time_hidden + config_.condition_dim;
  Block b;
  b.spatial = params_.add(name + ".spatial", {joints, joints}, spatial_init);
  b.temporal = params_.add(name + ".temporal", {config_.frames, config_.frames}, identity(config_.frames));
  b.weight = params_.add(name + ".weight", {in, out}, uniform_init(in * out, in, rng));
  b.bias = params_.add(name + ".bias", {out}, std::vector<double>(out, 0.0));
  b.cond = params_.add(name + ".cond", {cond_dim, out}, uniform_init(cond_dim * out, cond_dim, rng));
  b.residual = in == out;
  return b;
}

Tensor Denoiser::run_block(const Block& block, const Tensor& x, const Tensor& cond) const {
  const std::size_t batch = x.dim(0), out = block.bias.dim(0);
  Tensor h = mix(mix(x, block.spatial, 2), block.temporal, 1);
  h = matmul(h, block.weight) + block.bias;
  h = h + reshape(matmul(cond, block.cond), {batch, 1, 1, out});
  h = leaky_relu(h, 0.2);
  return block.residual ? h + x : h;
}

Tensor Denoiser::time_features(const std::vector<std::size_t>& steps) const {
  const std::size_t dim = config_.time_embed_dim;
  std::vector<double> emb;
  emb.reserve(steps.size() * dim);
  for (std::size_t t : steps) {
    const auto e = timestep_embedding(static_cast<double>(t), dim);
    emb.insert(emb.end(), e.begin(), e.end());
  }
  const Tensor e({steps.size(), dim}, std::move(emb));
  return matmul(relu(matmul(e, time_w1_) + time_b1_), time_w2_) + time_b2_;
}

Tensor Denoiser::predict(const Tensor& noisy, const std::vector<std::size_t>& steps,
                         const Tensor& condition) const {
  const auto& c = config_;
  if (noisy.rank() != 4 || noisy.dim(1) != c.frames || noisy.dim(2) != c.joints || noisy.dim(3) != c.channels) {
    throw ContractViolation("denoiser input must be B x " + std::to_string(c.frames) + " x " +
                            std::to_string(c.joints) + " x " + std::to_string(c.channels) + ", got " +
                            shape_string(noisy.shape()));
  }
  const std::size_t batch = noisy.dim(0);
  if (steps.size() != batch || condition.rank() != 2 || condition.dim(0) != batch ||
      condition.dim(1) != c.condition_dim) {
    throw ContractViolation("denoiser needs one step and one " + std::to_string(c.condition_dim) +
                            "-vector condition per sample");
  }
  const Tensor cond = concat({time_features(steps), condition}, 1);
  const Tensor h1 = run_block(blocks_[0], noisy, cond);
  const Tensor skip1 = run_block(blocks_[1], h1, cond);
  const Tensor h3 = run_block(blocks_[2], mix(skip1, pool_, 2), cond);
  const Tensor skip2 = run_block(blocks_[3], h3, cond);
  const Tensor h5 = run_block(blocks_[4], skip2, cond);
  Tensor h6 = run_block(blocks_[5], h5, cond);
  if (h6.dim(3) == skip2.dim(3)) h6 = h6 + skip2;
  const Tensor merged = concat({mix(h6, unpool_, 2), skip1}, 3);
  return matmul(merged, out_w_) + out_b_;
}

std::vector<double> sample_futures(const Denoiser& denoiser, const Tensor& condition,
                                   const DiffusionSchedule& schedule, std::vector<RngStream>& streams,
                                   PosteriorVariance variance) {
  NoGradGuard guard;
  const auto& c = denoiser.config();
  const std::size_t m = streams.size(), block = c.frames * c.joints * c.channels;
  if (m == 0) throw ContractViolation("sample_futures needs at least one stream");
  if (condition.rank() != 2 || condition.dim(0) != 1) throw ContractViolation("condition must be 1 x D");
  const Tensor cond = expand(condition.detach(), {m, condition.dim(1)});

  std::vector<double> u(m * block);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < block; ++j) u[i * block + j] = streams[i].normal();

  std::vector<double> xi(m * block, 0.0);
  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    const Tensor eps_hat = denoiser.predict(Tensor({m, c.frames, c.joints, c.channels}, u),
                                            std::vector<std::size_t>(m, t), cond);
    if (t > 1) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < block; ++j) xi[i * block + j] = streams[i].normal();
    }
    u = reverse_step(u, t, eps_hat.values(), schedule, xi, variance);
  }
  return u;
}

std::vector<double> sample_future(const Denoiser& denoiser, const Tensor& condition,
                                  const DiffusionSchedule& schedule, RngStream& rng,
                                  PosteriorVariance variance) {
  std::vector<RngStream> streams{rng};
  auto out = sample_futures(denoiser, condition, schedule, streams, variance);
  rng = streams.front();
  return out;
}

}  // namespace gicisad::diffusion
