#include "gicisad/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gicisad/errors.hpp"
#include "gicisad/numerics/adam.hpp"

namespace gicisad::pipeline {

std::vector<PreparedWindow> prepare_windows(const pose::PoseDataset& dataset, const TrainConfig& config) {
  std::vector<PreparedWindow> out;
  for (const auto& w : pose::make_windows(dataset, config.window_length, config.past_frames, config.stride)) {
    auto n = pose::normalize_window(w, config.normalize);
    out.push_back({n.window.origin, std::move(n.window.past), std::move(n.window.future), std::move(n.record)});
  }
  return out;
}

double total_loss(double graph, double puzzle, double diffusion, double lambda1, double lambda2) {
  return lambda1 * (graph + lambda2 * puzzle) + diffusion;
}

Tensor total_loss(const Tensor& graph, const Tensor& puzzle, const Tensor& diffusion, double lambda1,
                  double lambda2) {
  return (graph + puzzle * lambda2) * lambda1 + diffusion;
}

LossTerms batch_loss(const Model& model, std::span<const PreparedWindow* const> batch, RngStream rng) {
  const auto& cfg = model.config();
  const std::size_t b = batch.size(), j = model.joints(), c = model.channels();
  const std::size_t frames = model.future_frames();
  if (b == 0) throw ContractViolation("batch_loss needs at least one window");

  std::vector<const std::vector<double>*> past, future;
  for (const auto* w : batch) {
    past.push_back(&w->past);
    future.push_back(&w->future);
  }

  LossTerms terms;
  graph::Adjacency adjacency = model.adjacency();
  auto puzzle_rng = rng.split(1);
  if (cfg.use_puzzle) {
    const auto partition = jigsaw::extract_subgraphs(adjacency, cfg.subgraphs);
    auto shuffled = jigsaw::shuffle(cfg.puzzle_kind, adjacency, partition, puzzle_rng);
    adjacency = std::move(shuffled.permuted);
    terms.move = std::move(shuffled.move);
  }

  const auto& fc = model.forecaster();
  const Tensor signals = forecaster::node_signals(past, cfg.past_frames, j, c);
  const auto enc = forecaster::encode(fc, signals, adjacency);

  if (cfg.use_graph_loss) {
    const Tensor target = cfg.graph_loss_target == GraphLossTarget::kFuture
                              ? forecaster::time_average(future, frames, j, c)
                              : forecaster::time_average(past, cfg.past_frames, j, c);
    terms.graph = forecaster::graph_loss(enc.forecast, target);
  } else {
    terms.graph = Tensor::scalar(0.0);
  }
  if (cfg.use_puzzle) {
    terms.puzzle = forecaster::puzzle_loss(fc, enc.condition, std::vector<std::size_t>(b, terms.move.class_id)).loss;
  } else {
    terms.puzzle = Tensor::scalar(0.0);
  }

  auto step_rng = rng.split(2);
  const std::size_t steps = model.schedule().steps();
  if (cfg.timestep_sampling == TimestepSampling::kPerBatch) {
    terms.steps.assign(b, 1 + step_rng.uniform_index(steps));
  } else {
    for (std::size_t i = 0; i < b; ++i) terms.steps.push_back(1 + step_rng.uniform_index(steps));
  }

  auto noise_rng = rng.split(3);
  const std::size_t block = frames * j * c;
  std::vector<double> eps = noise_rng.normal_vector(b * block);
  std::vector<double> noisy(b * block);
  for (std::size_t i = 0; i < b; ++i) {
    const std::span<const double> e(eps.data() + i * block, block);
    const auto xt = diffusion::forward_corrupt(batch[i]->future, terms.steps[i], e, model.schedule());
    std::copy(xt.begin(), xt.end(), noisy.begin() + static_cast<std::ptrdiff_t>(i * block));
  }
  const Shape shape{b, frames, j, c};
  const Tensor eps_hat = model.denoiser().predict(Tensor(shape, std::move(noisy)), terms.steps, enc.condition);
  terms.diffusion = diffusion::diffusion_loss(Tensor(shape, std::move(eps)), eps_hat);
  terms.total = total_loss(terms.graph, terms.puzzle, terms.diffusion, cfg.lambda1, cfg.lambda2);
  return terms;
}

TrainResult train(const std::vector<PreparedWindow>& windows, std::size_t joints, std::size_t channels,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (windows.empty()) throw ConfigError("training set yields no windows");
  TrainResult result;
  result.model = std::make_unique<Model>(config, joints, channels);
  Model& model = *result.model;
  const std::size_t expected = config.past_frames * joints * channels;
  for (const auto& w : windows) {
    if (w.past.size() != expected || w.future.size() != model.future_frames() * joints * channels) {
      throw DataError("window shape does not match the configured joints/channels/frames");
    }
  }

  AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  AdamState adam(model.params(), opts);
  const RngStream root = RngStream(config.seed).split(100);

  std::vector<std::size_t> order(windows.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const RngStream epoch_rng = root.split(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = epoch_rng.split(0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t start = 0, index = 0; start < order.size(); start += config.batch_size, ++index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const PreparedWindow*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&windows[order[i]]);

      const auto where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(index + 1);
      const LossTerms terms = batch_loss(model, batch, epoch_rng.split(1 + index));
      if (!std::isfinite(terms.total.item())) throw NumericError("non-finite loss at " + where);
      model.params().zero_grad();
      terms.total.backward();
      try {
        adam_step(model.params(), adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at " + where);
      }

      stats.batches++;
      stats.total += terms.total.item();
      stats.graph += terms.graph.item();
      stats.puzzle += terms.puzzle.item();
      stats.diffusion += terms.diffusion.item();
    }
    const double n = static_cast<double>(stats.batches);
    stats.total /= n;
    stats.graph /= n;
    stats.puzzle /= n;
    stats.diffusion /= n;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  model.params().zero_grad();
  return result;
}

TrainResult train(const pose::PoseDataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  return train(prepare_windows(dataset, config), dataset.joints, dataset.channels, config, on_epoch);
}

std::string format_loss_history(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,total,graph,puzzle,diffusion\n";
  for (const auto& s : history) {
    out << s.epoch << "," << pose::format_number(s.total) << "," << pose::format_number(s.graph) << ","
        << pose::format_number(s.puzzle) << "," << pose::format_number(s.diffusion) << "\n";
  }
  return out.str();
}

}  // namespace gicisad::pipeline
