#include "gicisad/forecaster/forecaster.hpp"

#include <cmath>

#include "gicisad/errors.hpp"

namespace gicisad::forecaster {

namespace {

Tensor uniform_param(ParamSet& params, const std::string& name, Shape shape, std::size_t fan_in,
                     RngStream& rng) {
  const std::size_t n = numel(shape);
  return params.add(name, std::move(shape),
                    uniform_values(n, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
}

Tensor zero_param(ParamSet& params, const std::string& name, Shape shape) {
  const std::size_t n = numel(shape);
  return params.add(name, std::move(shape), std::vector<double>(n, 0.0));
}

}  // namespace

Forecaster::Forecaster(const ForecasterConfig& config, RngStream& rng) : config_(config) {
  const auto& c = config_;
  if (c.joints < 2 || c.embed_dim == 0 || c.channels == 0 || c.past_frames == 0 || c.hidden == 0 ||
      c.puzzle_classes == 0) {
    throw ConfigError("forecaster dimensions must be positive (and at least two joints)");
  }
  const std::size_t k = c.joints, d = c.embed_dim, in = c.channels * c.past_frames;
  auto v_rng = rng.split(1);
  v_ = params_.add("graph.embeddings", {k, d}, graph::init_embeddings(k, d, v_rng));
  auto w_rng = rng.split(2);
  w_ = uniform_param(params_, "graph.input_proj", {in, d}, in, w_rng);
  auto s_rng = rng.split(3);
  s_ = uniform_param(params_, "graph.attention", {4 * d, 1}, 4 * d, s_rng);

  auto h_rng = rng.split(4);
  head_w1_ = uniform_param(params_, "forecast.w1", {d, c.hidden}, d, h_rng);
  head_b1_ = zero_param(params_, "forecast.b1", {c.hidden});
  head_w2_ = uniform_param(params_, "forecast.w2", {c.hidden, c.channels}, c.hidden, h_rng);
  head_b2_ = zero_param(params_, "forecast.b2", {c.channels});

  auto c_rng = rng.split(5);
  cond_w_ = uniform_param(params_, "condition.w", {k * d, d}, k * d, c_rng);
  cond_b_ = zero_param(params_, "condition.b", {d});

  auto p_rng = rng.split(6);
  puzzle_w_ = uniform_param(params_, "puzzle.w", {d, c.puzzle_classes}, d, p_rng);
  puzzle_b_ = zero_param(params_, "puzzle.b", {c.puzzle_classes});
}

graph::Adjacency Forecaster::adjacency(std::size_t degree) const {
  return graph::build_adjacency({v_.values(), config_.joints, config_.embed_dim}, degree);
}

Tensor node_signals(const std::vector<const std::vector<double>*>& past_blocks, std::size_t frames,
                    std::size_t joints, std::size_t channels) {
  const std::size_t b = past_blocks.size(), row = frames * channels;
  std::vector<double> out(b * joints * row);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& block = *past_blocks[i];
    if (block.size() != frames * joints * channels) throw ContractViolation("past block size mismatch");
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t k = 0; k < joints; ++k)
        for (std::size_t ch = 0; ch < channels; ++ch)
          out[(i * joints + k) * row + f * channels + ch] = block[(f * joints + k) * channels + ch];
  }
  return Tensor({b, joints, row}, std::move(out));
}

Tensor time_average(const std::vector<const std::vector<double>*>& blocks, std::size_t frames,
                    std::size_t joints, std::size_t channels) {
  const std::size_t b = blocks.size(), stride = joints * channels;
  std::vector<double> out(b * stride, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& block = *blocks[i];
    if (block.size() != frames * stride) throw ContractViolation("block size mismatch");
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t j = 0; j < stride; ++j) out[i * stride + j] += block[f * stride + j];
  }
  for (double& x : out) x /= static_cast<double>(frames);
  return Tensor({b, joints, channels}, std::move(out));
}

Tensor attention_coefficients(const Forecaster& model, const Tensor& signals,
                              const graph::Adjacency& permuted) {
  const auto& c = model.config();
  if (signals.rank() != 3 || signals.dim(1) != c.joints || signals.dim(2) != c.channels * c.past_frames) {
    throw ContractViolation("signals must be B x K x (C*l), got " + shape_string(signals.shape()));
  }
  if (permuted.nodes != c.joints) throw ContractViolation("adjacency size does not match K");
  const std::size_t b = signals.dim(0), k = c.joints, d = c.embed_dim;
  const Tensor projected = matmul(signals, model.input_proj());
  const Tensor g = concat({expand(model.embeddings(), {b, k, d}), projected}, 2);
  const Tensor self_part = matmul(g, slice(model.attention_vector(), 0, 0, 2 * d));
  const Tensor other_part = matmul(g, slice(model.attention_vector(), 0, 2 * d, 2 * d));
  const Tensor logits = leaky_relu(self_part + reshape(other_part, {b, 1, k}), 0.2);
  const auto mask = permuted.with_self_loops();
  return masked_softmax(logits, mask);
}

Tensor node_representations(const Forecaster& model, const Tensor& alpha, const Tensor& signals) {
  return relu(bmm(alpha, matmul(signals, model.input_proj())));
}

Tensor forecast_future_avg(const Forecaster& model, const Tensor& representations) {
  const Tensor gated = representations * model.embeddings();
  const Tensor hidden = relu(matmul(gated, model.head_w1()) + model.head_b1());
  return matmul(hidden, model.head_w2()) + model.head_b2();
}

Tensor graph_loss(const Tensor& forecast, const Tensor& target) {
  if (forecast.shape() != target.shape() || forecast.rank() == 0) {
    throw ContractViolation("graph_loss shape mismatch: " + shape_string(forecast.shape()) + " vs " +
                            shape_string(target.shape()));
  }
  return sum(square(forecast - target)) * (1.0 / static_cast<double>(forecast.dim(0)));
}

Tensor condition_vector(const Forecaster& model, const Tensor& representations) {
  const auto& c = model.config();
  const std::size_t b = representations.dim(0);
  return matmul(reshape(representations, {b, c.joints * c.embed_dim}), model.cond_w()) + model.cond_b();
}

PuzzleOutput puzzle_loss(const Forecaster& model, const Tensor& condition,
                         const std::vector<std::size_t>& class_ids) {
  const std::size_t classes = model.config().puzzle_classes;
  if (class_ids.size() != condition.dim(0)) throw ContractViolation("one puzzle class id per sample");
  for (std::size_t id : class_ids) {
    if (id >= classes) {
      throw ContractViolation("puzzle class " + std::to_string(id) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
  }
  const Tensor logits = matmul(condition, model.puzzle_w()) + model.puzzle_b();
  PuzzleOutput out;
  out.loss = cross_entropy(logits, class_ids);
  {
    NoGradGuard guard;
    out.probabilities = softmax_last(logits.detach());
  }
  return out;
}

GraphEncoding encode(const Forecaster& model, const Tensor& signals, const graph::Adjacency& permuted) {
  GraphEncoding enc;
  enc.alpha = attention_coefficients(model, signals, permuted);
  enc.representations = node_representations(model, enc.alpha, signals);
  enc.condition = condition_vector(model, enc.representations);
  enc.forecast = forecast_future_avg(model, enc.representations);
  return enc;
}

}  // namespace gicisad::forecaster
