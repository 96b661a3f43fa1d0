#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gicisad/diffusion/schedule.hpp"
#include "gicisad/errors.hpp"
#include "gicisad/eval/eval.hpp"
#include "gicisad/pipeline/model.hpp"
#include "gicisad/pipeline/score.hpp"
#include "gicisad/pipeline/train.hpp"
#include "gicisad/pose/data.hpp"
#include "gicisad/pose/synthetic.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace gicisad;

namespace {

pose::PoseDataset load_poses(const fs::path& path) {
  return pose::load_pose_dataset(fs::is_directory(path) ? path / "poses.txt" : path);
}

py::dict schedule_table(const diffusion::DiffusionSchedule& s) {
  std::vector<double> beta, alpha_bar;
  for (std::size_t t = 1; t <= s.steps(); ++t) {
    beta.push_back(s.beta(t));
    alpha_bar.push_back(s.alpha_bar(t));
  }
  py::dict out;
  out["beta"] = beta;
  out["alpha_bar"] = alpha_bar;
  return out;
}

struct LoadedModel {
  std::unique_ptr<pipeline::Model> model;
};

std::vector<std::tuple<std::string, std::int64_t, double>> score_data(const LoadedModel& m, const fs::path& data,
                                                                       std::optional<std::size_t> generations,
                                                                       const std::string& aggregation,
                                                                       std::optional<std::uint64_t> seed) {
  const auto& cfg = m.model->config();
  const auto dataset = load_poses(data);
  const auto windows = pipeline::prepare_windows(dataset, cfg);
  std::vector<pipeline::ScoreRecord> records;
  {
    py::gil_scoped_release release;
    records = pipeline::score_windows(*m.model, windows, generations.value_or(cfg.generations),
                                      pipeline::parse_aggregation(aggregation), seed.value_or(cfg.seed), cfg.threads);
  }
  const auto frames = eval::flatten(
      eval::frame_scores(records, eval::video_extents(dataset), cfg.window_length, cfg.past_frames));
  std::vector<std::tuple<std::string, std::int64_t, double>> out;
  for (const auto& f : frames) out.emplace_back(f.video_id, f.frame, f.score);
  return out;
}

}  // namespace

PYBIND11_MODULE(_gicisad, m) {
  m.doc() = "Skeleton video anomaly detection with graph-conditioned diffusion";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "schedule",
      [](const std::string& kind, std::size_t steps, double beta_start, double beta_end) {
        return schedule_table(
            diffusion::build_schedule(diffusion::parse_schedule_kind(kind), steps, beta_start, beta_end));
      },
      py::arg("kind") = "cosine", py::arg("steps") = 10, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.01,
      "Variance schedule as {'beta': [...], 'alpha_bar': [...]} for t = 1..T.");

  m.def(
      "aggregate",
      [](const std::vector<double>& scores, const std::string& strategy) {
        return pipeline::aggregate_scores(scores, pipeline::parse_aggregation(strategy));
      },
      py::arg("scores"), py::arg("strategy") = "min");
  m.def(
      "multi_actor_score", [](const std::vector<double>& scores) { return pipeline::multi_actor_score(scores); },
      py::arg("scores"));
  m.def(
      "auroc",
      [](const std::vector<double>& scores, const std::vector<bool>& anomalous) {
        return eval::auroc(scores, anomalous).auroc;
      },
      py::arg("scores"), py::arg("anomalous"));

  m.def(
      "synthesize",
      [](const std::string& spec_text, const fs::path& out_dir) {
        const auto data = pose::generate_synthetic(pose::parse_synthetic_spec(spec_text));
        fs::create_directories(out_dir);
        pose::write_pose_dataset(out_dir / "poses.txt", data.dataset);
        pose::write_labels(out_dir / "labels.txt", data.labels);
        return py::make_tuple(data.dataset.tracks.size(), data.labels.size(), data.labels.anomalous_count());
      },
      py::arg("spec"), py::arg("out_dir"),
      "Writes poses.txt and labels.txt; returns (tracks, labelled frames, anomalous frames).");

  m.def(
      "train",
      [](const std::string& config_text, const fs::path& data, const fs::path& checkpoint) {
        const auto config = pipeline::parse_train_config(config_text);
        const auto dataset = load_poses(data);
        pipeline::TrainResult result;
        {
          py::gil_scoped_release release;
          result = pipeline::train(dataset, config);
        }
        pipeline::save_model(checkpoint, *result.model);
        std::vector<py::dict> history;
        for (const auto& s : result.history) {
          py::dict row;
          row["epoch"] = s.epoch;
          row["total"] = s.total;
          row["graph"] = s.graph;
          row["puzzle"] = s.puzzle;
          row["diffusion"] = s.diffusion;
          history.push_back(row);
        }
        return history;
      },
      py::arg("config"), py::arg("data"), py::arg("checkpoint"),
      "Trains from `key = value` config text, saves the checkpoint and returns the per-epoch losses.");

  py::class_<LoadedModel>(m, "Model")
      .def_static(
          "load", [](const fs::path& path) { return LoadedModel{pipeline::load_model(path)}; }, py::arg("path"))
      .def_static(
          "from_config",
          [](const std::string& config_text, std::size_t joints, std::size_t channels) {
            return LoadedModel{
                std::make_unique<pipeline::Model>(pipeline::parse_train_config(config_text), joints, channels)};
          },
          py::arg("config") = "", py::arg("joints") = pose::kTemplateJoints, py::arg("channels") = 2)
      .def_property_readonly("joints", [](const LoadedModel& m) { return m.model->joints(); })
      .def_property_readonly("config",
                             [](const LoadedModel& m) { return pipeline::format_train_config(m.model->config()); })
      .def("param_counts",
           [](const LoadedModel& m) {
             const auto b = eval::param_count(m.model->params());
             py::dict out;
             for (const auto& [name, n] : b.modules) out[py::str(name)] = n;
             out["total"] = b.total;
             return out;
           })
      .def("adjacency",
           [](const LoadedModel& m) {
             const auto a = m.model->adjacency();
             std::vector<std::vector<std::size_t>> rows;
             for (std::size_t k = 0; k < a.nodes; ++k) rows.push_back(a.neighbors(k));
             return rows;
           })
      .def("score", &score_data, py::arg("data"), py::arg("generations") = py::none(),
           py::arg("aggregation") = "min", py::arg("seed") = py::none(),
           "Frame scores as (video_id, frame, score) tuples.");
}
