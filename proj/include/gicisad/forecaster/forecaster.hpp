#pragma once

#include <cstddef>
#include <vector>

#include "gicisad/graph/adjacency.hpp"
#include "gicisad/jigsaw/jigsaw.hpp"
#include "gicisad/numerics/params.hpp"
#include "gicisad/numerics/rng.hpp"

namespace gicisad::forecaster {

struct ForecasterConfig {
  std::size_t joints = 17;        // K
  std::size_t embed_dim = 16;     // D
  std::size_t channels = 2;       // C
  std::size_t past_frames = 3;    // l
  std::size_t hidden = 128;
  std::size_t puzzle_classes = 10;
};

/// Graph-side parameters. Tensor layouts (all row-major):
///   embeddings  V  K x D
///   input_proj  W  (C*l) x D, so W x_k is x_k^T W
///   attention   s  4D x 1, the first 2D entries score g_k, the rest g_n
///   head        D x hidden, hidden, hidden x C, C
///   condition   (K*D) x D, D
///   puzzle      D x classes, classes
class Forecaster {
 public:
  Forecaster(const ForecasterConfig& config, RngStream& rng);

  const ForecasterConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  const Tensor& embeddings() const { return v_; }
  const Tensor& input_proj() const { return w_; }
  const Tensor& attention_vector() const { return s_; }
  const Tensor& head_w1() const { return head_w1_; }
  const Tensor& head_b1() const { return head_b1_; }
  const Tensor& head_w2() const { return head_w2_; }
  const Tensor& head_b2() const { return head_b2_; }
  const Tensor& cond_w() const { return cond_w_; }
  const Tensor& cond_b() const { return cond_b_; }
  const Tensor& puzzle_w() const { return puzzle_w_; }
  const Tensor& puzzle_b() const { return puzzle_b_; }

  /// Current adjacency built from V (values only, no gradient).
  graph::Adjacency adjacency(std::size_t degree) const;

 private:
  ForecasterConfig config_;
  ParamSet params_;
  Tensor v_, w_, s_;
  Tensor head_w1_, head_b1_, head_w2_, head_b2_;
  Tensor cond_w_, cond_b_;
  Tensor puzzle_w_, puzzle_b_;
};

/// Node signals for a batch of past blocks: each block is l x K x C and the
/// result is B x K x (l*C), the row for joint k listing its frames in order.
Tensor node_signals(const std::vector<const std::vector<double>*>& past_blocks, std::size_t frames,
                    std::size_t joints, std::size_t channels);

/// Future-frame (or any block's) time average per joint: B x K x C.
Tensor time_average(const std::vector<const std::vector<double>*>& blocks, std::size_t frames,
                    std::size_t joints, std::size_t channels);

/// alpha (B x K x K): softmax over N(k) and k of LeakyReLU(s^T (g_k ++ g_n)),
/// g_k = v_k ++ W x_k, zero outside the neighbourhood.
Tensor attention_coefficients(const Forecaster& model, const Tensor& signals,
                              const graph::Adjacency& permuted);

/// H (B x K x D) = ReLU(alpha W X).
Tensor node_representations(const Forecaster& model, const Tensor& alpha, const Tensor& signals);

/// B x K x C forecast of the future average from v_k * h_k.
Tensor forecast_future_avg(const Forecaster& model, const Tensor& representations);

/// Batch mean of the squared L2 residual over all K*C entries.
Tensor graph_loss(const Tensor& forecast, const Tensor& target);

/// B x D conditioning vectors from the flattened representations.
Tensor condition_vector(const Forecaster& model, const Tensor& representations);

struct PuzzleOutput {
  Tensor loss;
  Tensor probabilities;  // B x classes
};

/// Cross-entropy of the puzzle head against one class id per sample.
PuzzleOutput puzzle_loss(const Forecaster& model, const Tensor& condition,
                         const std::vector<std::size_t>& class_ids);

struct GraphEncoding {
  Tensor alpha;
  Tensor representations;  // H
  Tensor condition;        // script H
  Tensor forecast;
};

/// attention -> representations -> forecast and condition in one pass.
GraphEncoding encode(const Forecaster& model, const Tensor& signals, const graph::Adjacency& permuted);

}  // namespace gicisad::forecaster
