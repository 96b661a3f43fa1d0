// gicisad command line: synth, train, score, eval, inspect.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "gicisad/errors.hpp"
#include "gicisad/eval/eval.hpp"
#include "gicisad/jigsaw/jigsaw.hpp"
#include "gicisad/numerics/allocator.hpp"
#include "gicisad/pipeline/model.hpp"
#include "gicisad/pipeline/score.hpp"
#include "gicisad/pipeline/train.hpp"
#include "gicisad/pose/data.hpp"
#include "gicisad/pose/synthetic.hpp"

namespace fs = std::filesystem;
using namespace gicisad;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

constexpr const char* kPoseFile = "poses.txt";
constexpr const char* kLabelFile = "labels.txt";
constexpr const char* kSpecFile = "spec.txt";

pose::PoseDataset load_data_dir(const fs::path& dir) {
  const fs::path file = fs::is_directory(dir) ? dir / kPoseFile : dir;
  if (!fs::exists(file)) throw IoError("no pose file at '" + file.string() + "'");
  return pose::load_pose_dataset(file);
}

int run_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const auto spec = pose::parse_synthetic_spec(pose::read_text_file(spec_path));
  const auto data = pose::generate_synthetic(spec);
  fs::create_directories(out_dir);
  pose::write_pose_dataset(out_dir / kPoseFile, data.dataset);
  pose::write_labels(out_dir / kLabelFile, data.labels);
  pose::write_text_file(out_dir / kSpecFile, pose::format_synthetic_spec(spec));
  std::cout << "wrote " << data.dataset.tracks.size() << " tracks and " << data.labels.size() << " labels ("
            << data.labels.anomalous_count() << " anomalous) to " << out_dir.string() << "\n";
  return kOk;
}

int run_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out,
              std::optional<fs::path> history_path, bool quiet) {
  const auto config = pipeline::load_train_config(config_path);
  const auto dataset = load_data_dir(data_dir);
  const auto result = pipeline::train(dataset, config, [&](const pipeline::EpochStats& s) {
    if (!quiet) {
      std::fprintf(stderr, "epoch %zu  total %.6f  graph %.6f  puzzle %.6f  diffusion %.6f\n", s.epoch, s.total,
                   s.graph, s.puzzle, s.diffusion);
    }
  });
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  pipeline::save_model(out, *result.model);
  const fs::path history = history_path.value_or(fs::path(out.string() + ".loss.csv"));
  pose::write_text_file(history, pipeline::format_loss_history(result.history));
  std::cout << "checkpoint " << out.string() << "\nloss history " << history.string() << "\n";
  return kOk;
}

int run_score(const fs::path& ckpt, const fs::path& data_dir, const fs::path& out, std::optional<std::string> agg,
              std::optional<std::size_t> generations, std::optional<std::size_t> threads,
              std::optional<std::uint64_t> seed, std::optional<fs::path> records_path) {
  const auto model = pipeline::load_model(ckpt);
  const auto& cfg = model->config();
  const auto dataset = load_data_dir(data_dir);
  if (dataset.joints != model->joints() || dataset.channels != model->channels()) {
    throw DataError("data has " + std::to_string(dataset.joints) + " joints x " + std::to_string(dataset.channels) +
                    " channels but the checkpoint expects " + std::to_string(model->joints()) + " x " +
                    std::to_string(model->channels()));
  }
  const auto strategy = agg ? pipeline::parse_aggregation(*agg) : cfg.aggregation;
  const std::size_t m = generations.value_or(cfg.generations);
  if (m == 0) throw ConfigError("--M must be at least 1");
  const auto windows = pipeline::prepare_windows(dataset, cfg);
  const auto records =
      pipeline::score_windows(*model, windows, m, strategy, seed.value_or(cfg.seed), threads.value_or(cfg.threads));
  const auto series =
      eval::frame_scores(records, eval::video_extents(dataset), cfg.window_length, cfg.past_frames);
  const auto frames = eval::flatten(series);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  pose::write_text_file(out, eval::format_frame_scores(frames));
  if (records_path) {
    std::string text = "video_id,actor_id,first_frame,aggregate,scores\n";
    for (const auto& r : records) {
      text += r.origin.video_id + "," + r.origin.actor_id + "," + std::to_string(r.origin.first_frame) + "," +
              pose::format_number(r.aggregate) + ",";
      for (std::size_t i = 0; i < r.generation_scores.size(); ++i) {
        text += (i ? " " : "") + pose::format_number(r.generation_scores[i]);
      }
      text += "\n";
    }
    pose::write_text_file(*records_path, text);
  }
  std::cout << "scored " << records.size() << " windows (" << pipeline::to_string(strategy) << ", M=" << m
            << ") into " << frames.size() << " frame scores\n";
  return kOk;
}

int run_eval(const fs::path& scores_path, const fs::path& labels_path, const fs::path& out_dir) {
  const auto scores = eval::parse_frame_scores(pose::read_text_file(scores_path));
  const auto labels = pose::load_labels(labels_path);
  const auto roc = eval::auroc(scores, labels);
  eval::emit_report(scores, labels, roc, out_dir);
  std::cout << "auroc " << pose::format_number(roc.auroc) << " (" << roc.positives << " anomalous, "
            << roc.negatives << " normal frames)\n";
  return kOk;
}

int run_inspect(std::optional<fs::path> ckpt, std::optional<fs::path> config_path, std::size_t joints,
                std::size_t channels, bool schedule, bool graph_dump, bool params) {
  std::unique_ptr<pipeline::Model> model;
  if (ckpt) {
    model = pipeline::load_model(*ckpt);
  } else {
    const auto config = config_path ? pipeline::load_train_config(*config_path) : pipeline::TrainConfig{};
    model = std::make_unique<pipeline::Model>(config, joints, channels);
  }
  if (!schedule && !graph_dump && !params) {
    std::cout << pipeline::model_metadata(*model);
    return kOk;
  }
  if (schedule) std::cout << diffusion::format_schedule(model->schedule());
  if (graph_dump) {
    const auto a = model->adjacency();
    std::cout << "adjacency K=" << a.nodes << " degree=" << a.degree << "\n";
    for (std::size_t k = 0; k < a.nodes; ++k) {
      std::cout << k << ":";
      for (std::size_t n : a.neighbors(k)) std::cout << " " << n;
      std::cout << "\n";
    }
    const auto partition = jigsaw::extract_subgraphs(a, model->config().subgraphs);
    RngStream rng = RngStream(model->config().seed).split(0);
    const auto shuffled = jigsaw::shuffle(model->config().puzzle_kind, a, partition, rng);
    std::cout << jigsaw::describe(partition, shuffled.move);
  }
  if (params) std::cout << eval::format_param_breakdown(eval::param_count(model->params()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Skeleton video anomaly detection with graph-conditioned diffusion"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic pose dataset and labels");
  fs::path spec_path, synth_out;
  synth->add_option("--spec", spec_path, "Synthetic spec file")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model");
  fs::path config_path, train_data, train_out;
  std::optional<fs::path> history_path;
  bool quiet = false;
  train->add_option("--config", config_path, "Config file (key = value)")->required();
  train->add_option("--data", train_data, "Data directory or pose file")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--history", history_path, "Loss history CSV (default <out>.loss.csv)");
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  auto* score = app.add_subcommand("score", "Score windows and write frame scores");
  fs::path score_ckpt, score_data, score_out;
  std::optional<std::string> agg;
  std::optional<std::size_t> generations, threads;
  std::optional<std::uint64_t> score_seed;
  std::optional<fs::path> records_path;
  score->add_option("--ckpt", score_ckpt, "Checkpoint")->required();
  score->add_option("--data", score_data, "Data directory or pose file")->required();
  score->add_option("--out", score_out, "Frame score CSV")->required();
  score->add_option("--agg", agg, "Aggregation strategy")->check(CLI::IsMember({"min", "mean", "median", "max"}));
  score->add_option("--M", generations, "Generations per window");
  score->add_option("--threads", threads, "Worker threads (0 = all cores)");
  score->add_option("--seed", score_seed, "Sampling seed (default: config seed)");
  score->add_option("--records", records_path, "Also write per-window generation scores");

  auto* ev = app.add_subcommand("eval", "AUROC and report from frame scores");
  fs::path eval_scores, eval_labels, eval_out;
  ev->add_option("--scores", eval_scores, "Frame score CSV")->required();
  ev->add_option("--labels", eval_labels, "Label file")->required();
  ev->add_option("--out", eval_out, "Report directory")->required();

  auto* inspect = app.add_subcommand("inspect", "Show schedule, graph or parameter counts");
  std::optional<fs::path> inspect_ckpt, inspect_config;
  std::size_t joints = pose::kTemplateJoints, channels = 2;
  bool show_schedule = false, show_graph = false, show_params = false;
  auto* ckpt_opt = inspect->add_option("--ckpt", inspect_ckpt, "Checkpoint");
  inspect->add_option("--config", inspect_config, "Config file instead of a checkpoint (default: built-in defaults)")
      ->excludes(ckpt_opt);
  inspect->add_option("--joints", joints, "Joint count without a checkpoint");
  inspect->add_option("--channels", channels, "Channel count without a checkpoint");
  inspect->add_flag("--schedule", show_schedule, "Variance schedule table");
  inspect->add_flag("--graph", show_graph, "Adjacency, partition and a sample puzzle move");
  inspect->add_flag("--params", show_params, "Trainable scalars per module");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return run_synth(spec_path, synth_out);
    if (*train) return run_train(config_path, train_data, train_out, history_path, quiet);
    if (*score) {
      return run_score(score_ckpt, score_data, score_out, agg, generations, threads, score_seed, records_path);
    }
    if (*ev) return run_eval(eval_scores, eval_labels, eval_out);
    if (*inspect) {
      return run_inspect(inspect_ckpt, inspect_config, joints, channels, show_schedule, show_graph, show_params);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
