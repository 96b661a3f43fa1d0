#include "gicisad/pipeline/config.hpp"

#include <cmath>
#include <sstream>

#include "gicisad/errors.hpp"
#include "gicisad/keyvalue.hpp"
#include "gicisad/pose/data.hpp"

namespace gicisad::pipeline {

Aggregation parse_aggregation(const std::string& name) {
  if (name == "min") return Aggregation::kMin;
  if (name == "mean") return Aggregation::kMean;
  if (name == "median") return Aggregation::kMedian;
  if (name == "max") return Aggregation::kMax;
  throw ConfigError("unknown aggregation '" + name + "' (expected min, mean, median or max)");
}

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kMin: return "min";
    case Aggregation::kMean: return "mean";
    case Aggregation::kMedian: return "median";
    case Aggregation::kMax: return "max";
  }
  return "min";
}

GraphLossTarget parse_graph_loss_target(const std::string& name) {
  if (name == "future") return GraphLossTarget::kFuture;
  if (name == "past") return GraphLossTarget::kPast;
  throw ConfigError("unknown graph_loss_target '" + name + "' (expected future or past)");
}

std::string to_string(GraphLossTarget t) { return t == GraphLossTarget::kFuture ? "future" : "past"; }

ScoreTransform parse_score_transform(const std::string& name) {
  if (name == "smooth") return ScoreTransform::kSmooth;
  if (name == "raw") return ScoreTransform::kRaw;
  throw ConfigError("unknown score_transform '" + name + "' (expected smooth or raw)");
}

std::string to_string(ScoreTransform t) { return t == ScoreTransform::kSmooth ? "smooth" : "raw"; }

TimestepSampling parse_timestep_sampling(const std::string& name) {
  if (name == "batch") return TimestepSampling::kPerBatch;
  if (name == "sample") return TimestepSampling::kPerSample;
  throw ConfigError("unknown timestep_sampling '" + name + "' (expected batch or sample)");
}

std::string to_string(TimestepSampling s) { return s == TimestepSampling::kPerBatch ? "batch" : "sample"; }

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(std::isfinite(c.lambda1) && c.lambda1 >= 0.0)) fail("lambda1 must be a non-negative number");
  if (!(std::isfinite(c.lambda2) && c.lambda2 >= 0.0)) fail("lambda2 must be a non-negative number");
  if (!(std::isfinite(c.learning_rate) && c.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (c.batch_size == 0) fail("batch_size must be at least 1");
  if (c.past_frames == 0 || c.window_length <= c.past_frames) {
    fail("need 1 <= past_frames < window_length");
  }
  if (c.stride == 0) fail("stride must be at least 1");
  if (c.embed_dim == 0) fail("embed_dim must be at least 1");
  if (c.degree == 0) fail("degree must be at least 1");
  if (c.subgraphs < 2) fail("subgraphs must be at least 2");
  if (c.forecast_hidden == 0) fail("forecast_hidden must be at least 1");
  if (c.diffusion_steps == 0) fail("diffusion_steps must be at least 1");
  if (c.generations == 0) fail("generations must be at least 1");
  if (c.pooled_joints == 0) fail("pooled_joints must be at least 1");
  if (c.time_embed_dim == 0 || c.time_embed_dim % 2 != 0) fail("time_embed_dim must be a positive even number");
  if (c.time_hidden == 0) fail("time_hidden must be at least 1");
  for (std::size_t w : c.denoiser_channels) {
    if (w == 0) fail("denoiser_channels entries must be positive");
  }
  if (c.scheduler == diffusion::ScheduleKind::kLinear &&
      !(c.beta_start > 0.0 && c.beta_start <= c.beta_end && c.beta_end < 1.0)) {
    fail("linear schedule needs 0 < beta_start <= beta_end < 1");
  }
}

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "lambda1",         "lambda2",           "learning_rate",     "batch_size",
      "epochs",          "window_length",     "past_frames",       "stride",
      "embed_dim",       "degree",            "subgraphs",         "forecast_hidden",
      "diffusion_steps", "scheduler",         "beta_start",        "beta_end",
      "generations",     "aggregation",       "seed",              "puzzle_at_inference",
      "use_puzzle",      "use_graph_loss",    "puzzle_kind",       "graph_loss_target",
      "posterior_variance", "score_transform", "timestep_sampling", "normalize",
      "denoiser_channels", "pooled_joints",   "time_embed_dim",    "time_hidden",
      "threads"};
  return keys;
}

std::size_t get_count(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError(key + " must not be negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  const KeyValues kv = KeyValues::parse(text);
  kv.require_known(known_keys());
  TrainConfig c;
  c.lambda1 = kv.get_double("lambda1", c.lambda1);
  c.lambda2 = kv.get_double("lambda2", c.lambda2);
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.batch_size = get_count(kv, "batch_size", c.batch_size);
  c.epochs = get_count(kv, "epochs", c.epochs);
  c.window_length = get_count(kv, "window_length", c.window_length);
  c.past_frames = get_count(kv, "past_frames", c.past_frames);
  c.stride = get_count(kv, "stride", c.stride);
  c.embed_dim = get_count(kv, "embed_dim", c.embed_dim);
  c.degree = get_count(kv, "degree", c.degree);
  c.subgraphs = get_count(kv, "subgraphs", c.subgraphs);
  c.forecast_hidden = get_count(kv, "forecast_hidden", c.forecast_hidden);
  c.diffusion_steps = get_count(kv, "diffusion_steps", c.diffusion_steps);
  c.scheduler = diffusion::parse_schedule_kind(kv.get_string("scheduler", to_string(c.scheduler)));
  c.beta_start = kv.get_double("beta_start", c.beta_start);
  c.beta_end = kv.get_double("beta_end", c.beta_end);
  c.generations = get_count(kv, "generations", c.generations);
  c.aggregation = parse_aggregation(kv.get_string("aggregation", to_string(c.aggregation)));
  c.seed = get_count(kv, "seed", c.seed);
  c.puzzle_at_inference = kv.get_bool("puzzle_at_inference", c.puzzle_at_inference);
  c.use_puzzle = kv.get_bool("use_puzzle", c.use_puzzle);
  c.use_graph_loss = kv.get_bool("use_graph_loss", c.use_graph_loss);
  c.puzzle_kind = jigsaw::parse_puzzle_kind(kv.get_string("puzzle_kind", to_string(c.puzzle_kind)));
  c.graph_loss_target = parse_graph_loss_target(kv.get_string("graph_loss_target", to_string(c.graph_loss_target)));
  c.posterior_variance =
      diffusion::parse_posterior_variance(kv.get_string("posterior_variance", to_string(c.posterior_variance)));
  c.score_transform = parse_score_transform(kv.get_string("score_transform", to_string(c.score_transform)));
  c.timestep_sampling =
      parse_timestep_sampling(kv.get_string("timestep_sampling", to_string(c.timestep_sampling)));
  c.normalize = pose::parse_normalize_policy(kv.get_string("normalize", pose::to_string(c.normalize)));
  if (kv.contains("denoiser_channels")) {
    const auto widths = kv.get_int_list("denoiser_channels", {});
    if (widths.size() != 6) throw ConfigError("denoiser_channels needs exactly six widths");
    for (std::size_t i = 0; i < 6; ++i) {
      if (widths[i] <= 0) throw ConfigError("denoiser_channels entries must be positive");
      c.denoiser_channels[i] = static_cast<std::size_t>(widths[i]);
    }
  }
  c.pooled_joints = get_count(kv, "pooled_joints", c.pooled_joints);
  c.time_embed_dim = get_count(kv, "time_embed_dim", c.time_embed_dim);
  c.time_hidden = get_count(kv, "time_hidden", c.time_hidden);
  c.threads = get_count(kv, "threads", c.threads);
  validate(c);
  return c;
}

std::string format_train_config(const TrainConfig& c) {
  using pose::format_number;
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "lambda1 = " << format_number(c.lambda1) << "\n"
      << "lambda2 = " << format_number(c.lambda2) << "\n"
      << "learning_rate = " << format_number(c.learning_rate) << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "epochs = " << c.epochs << "\n"
      << "window_length = " << c.window_length << "\n"
      << "past_frames = " << c.past_frames << "\n"
      << "stride = " << c.stride << "\n"
      << "embed_dim = " << c.embed_dim << "\n"
      << "degree = " << c.degree << "\n"
      << "subgraphs = " << c.subgraphs << "\n"
      << "forecast_hidden = " << c.forecast_hidden << "\n"
      << "diffusion_steps = " << c.diffusion_steps << "\n"
      << "scheduler = " << to_string(c.scheduler) << "\n"
      << "beta_start = " << format_number(c.beta_start) << "\n"
      << "beta_end = " << format_number(c.beta_end) << "\n"
      << "generations = " << c.generations << "\n"
      << "aggregation = " << to_string(c.aggregation) << "\n"
      << "seed = " << c.seed << "\n"
      << "puzzle_at_inference = " << b(c.puzzle_at_inference) << "\n"
      << "use_puzzle = " << b(c.use_puzzle) << "\n"
      << "use_graph_loss = " << b(c.use_graph_loss) << "\n"
      << "puzzle_kind = " << to_string(c.puzzle_kind) << "\n"
      << "graph_loss_target = " << to_string(c.graph_loss_target) << "\n"
      << "posterior_variance = " << to_string(c.posterior_variance) << "\n"
      << "score_transform = " << to_string(c.score_transform) << "\n"
      << "timestep_sampling = " << to_string(c.timestep_sampling) << "\n"
      << "normalize = " << pose::to_string(c.normalize) << "\n"
      << "denoiser_channels = ";
  for (std::size_t i = 0; i < 6; ++i) out << (i ? "," : "") << c.denoiser_channels[i];
  out << "\n"
      << "pooled_joints = " << c.pooled_joints << "\n"
      << "time_embed_dim = " << c.time_embed_dim << "\n"
      << "time_hidden = " << c.time_hidden << "\n"
      << "threads = " << c.threads << "\n";
  return out.str();
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(pose::read_text_file(path));
}

}  // namespace gicisad::pipeline
