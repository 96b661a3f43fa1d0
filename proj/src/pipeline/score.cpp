#include "gicisad/pipeline/score.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "gicisad/errors.hpp"

namespace gicisad::pipeline {

double aggregate_scores(std::span<const double> scores, Aggregation strategy) {
  if (scores.empty()) throw ContractViolation("cannot aggregate an empty score set");
  switch (strategy) {
    case Aggregation::kMin: return *std::min_element(scores.begin(), scores.end());
    case Aggregation::kMax: return *std::max_element(scores.begin(), scores.end());
    case Aggregation::kMean: {
      double total = 0.0;
      for (double s : scores) total += s;
      return total / static_cast<double>(scores.size());
    }
    case Aggregation::kMedian: {
      std::vector<double> sorted(scores.begin(), scores.end());
      std::sort(sorted.begin(), sorted.end());
      const std::size_t n = sorted.size();
      return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
  }
  throw ContractViolation("unknown aggregation strategy");
}

double multi_actor_score(std::span<const double> per_actor) {
  if (per_actor.empty()) throw ContractViolation("multi-actor fusion needs at least one actor");
  const auto [lo, hi] = std::minmax_element(per_actor.begin(), per_actor.end());
  return aggregate_scores(per_actor, Aggregation::kMean) + std::log((1.0 + *hi) / (1.0 + *lo));
}

ScoreRecord score_window(const Model& model, const PreparedWindow& window, std::size_t generations,
                         Aggregation strategy, RngStream rng) {
  if (generations == 0) throw ContractViolation("need at least one generation");
  const auto& cfg = model.config();
  const std::size_t j = model.joints(), c = model.channels();
  NoGradGuard guard;

  graph::Adjacency adjacency = model.adjacency();
  if (cfg.use_puzzle && cfg.puzzle_at_inference) {
    const auto partition = jigsaw::extract_subgraphs(adjacency, cfg.subgraphs);
    auto puzzle_rng = rng.split(0);
    adjacency = jigsaw::shuffle(cfg.puzzle_kind, adjacency, partition, puzzle_rng).permuted;
  }
  const Tensor signals = forecaster::node_signals({&window.past}, cfg.past_frames, j, c);
  const auto enc = forecaster::encode(model.forecaster(), signals, adjacency);

  std::vector<RngStream> streams;
  for (std::size_t m = 0; m < generations; ++m) streams.push_back(rng.split(1 + m));
  const auto samples =
      diffusion::sample_futures(model.denoiser(), enc.condition, model.schedule(), streams, cfg.posterior_variance);

  ScoreRecord record;
  record.origin = window.origin;
  record.strategy = strategy;
  const std::size_t block = window.future.size();
  for (std::size_t m = 0; m < generations; ++m) {
    double sq = 0.0;
    for (std::size_t i = 0; i < block; ++i) {
      const double d = window.future[i] - samples[m * block + i];
      sq += d * d;
    }
    const double norm = std::sqrt(sq);
    double s = norm;
    if (cfg.score_transform == ScoreTransform::kSmooth) s = norm < 1.0 ? 0.5 * norm * norm : norm - 0.5;
    if (!std::isfinite(s)) {
      throw NumericError("non-finite score for window " + window.origin.video_id + "/" + window.origin.actor_id +
                         " frame " + std::to_string(window.origin.first_frame));
    }
    record.generation_scores.push_back(s);
  }
  record.aggregate = aggregate_scores(record.generation_scores, strategy);
  return record;
}

std::vector<ScoreRecord> score_windows(const Model& model, const std::vector<PreparedWindow>& windows,
                                       std::size_t generations, Aggregation strategy, std::uint64_t seed,
                                       std::size_t threads) {
  model.require_finite();
  const RngStream root(seed);
  std::vector<ScoreRecord> out(windows.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, windows.size()));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < windows.size(); i = next++) {
      try {
        out[i] = score_window(model, windows[i], generations, strategy, root.split(i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = windows.size();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<ScoreRecord> reaggregate(std::vector<ScoreRecord> records, Aggregation strategy) {
  for (auto& r : records) {
    r.aggregate = aggregate_scores(r.generation_scores, strategy);
    r.strategy = strategy;
  }
  return records;
}

}  // namespace gicisad::pipeline
