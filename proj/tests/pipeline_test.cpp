#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gicisad/errors.hpp"
#include "gicisad/pipeline/config.hpp"
#include "gicisad/pipeline/model.hpp"
#include "gicisad/pipeline/score.hpp"
#include "gicisad/pipeline/train.hpp"
#include "gicisad/pose/synthetic.hpp"

using namespace gicisad;
using namespace gicisad::pipeline;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.embed_dim = 4;
  c.degree = 3;
  c.subgraphs = 3;
  c.forecast_hidden = 8;
  c.diffusion_steps = 4;
  c.denoiser_channels = {4, 4, 6, 6, 8, 4};
  c.pooled_joints = 4;
  c.time_embed_dim = 4;
  c.time_hidden = 8;
  c.batch_size = 8;
  c.epochs = 2;
  c.generations = 3;
  c.learning_rate = 1e-3;
  c.seed = 7;
  return c;
}

pose::PoseDataset tiny_dataset(std::size_t videos = 2, std::size_t frames = 16, std::uint64_t seed = 3) {
  pose::SyntheticSpec spec;
  spec.seed = seed;
  spec.videos = videos;
  spec.frames = frames;
  return pose::generate_synthetic(spec).dataset;
}

std::size_t zero_grad_params(const Model& model, const std::string& prefix, bool* all_zero) {
  std::size_t matched = 0;
  *all_zero = true;
  for (const auto& p : model.params()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    ++matched;
    if (!p.tensor.requires_grad()) continue;
    for (double g : p.tensor.grad())
      if (g != 0.0) *all_zero = false;
  }
  return matched;
}

}  // namespace

TEST_CASE("total loss weighting") {
  CHECK(total_loss(2.0, 3.0, 0.5, 0.5, 2.0) == 4.5);
  CHECK(total_loss(2.0, 3.0, 0.5, 0.0, 2.0) == 0.5);
  const auto t = total_loss(Tensor::scalar(2.0), Tensor::scalar(3.0), Tensor::scalar(0.5), 0.5, 2.0);
  CHECK(t.item() == 4.5);
}

TEST_CASE("score aggregation strategies") {
  const std::vector<double> three{1, 2, 3}, four{4, 1, 3, 2};
  CHECK(aggregate_scores(three, Aggregation::kMin) == 1.0);
  CHECK(aggregate_scores(three, Aggregation::kMax) == 3.0);
  CHECK(aggregate_scores(three, Aggregation::kMean) == 2.0);
  CHECK(aggregate_scores(three, Aggregation::kMedian) == 2.0);
  CHECK(aggregate_scores(four, Aggregation::kMedian) == 2.5);
  CHECK(aggregate_scores(four, Aggregation::kMean) == 2.5);
  CHECK_THROWS_AS(aggregate_scores(std::vector<double>{}, Aggregation::kMin), ContractViolation);
  CHECK(parse_aggregation("median") == Aggregation::kMedian);
  CHECK_THROWS_AS(parse_aggregation("mode"), ConfigError);
}

TEST_CASE("aggregation order on random score sets") {
  RngStream rng(1);
  for (std::size_t trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng.uniform_index(20));
    for (double& x : s) x = rng.uniform() * 10.0;
    const double lo = aggregate_scores(s, Aggregation::kMin), hi = aggregate_scores(s, Aggregation::kMax);
    for (auto a : {Aggregation::kMean, Aggregation::kMedian}) {
      CHECK(lo <= aggregate_scores(s, a));
      CHECK(aggregate_scores(s, a) <= hi);
    }
  }
}

TEST_CASE("multi-actor fusion") {
  CHECK(multi_actor_score(std::vector<double>{1, 3}) == doctest::Approx(2.0 + std::log(2.0)));
  CHECK(multi_actor_score(std::vector<double>{1, 1}) == 1.0);
  CHECK(multi_actor_score(std::vector<double>{0.4}) == 0.4);
  CHECK_THROWS_AS(multi_actor_score(std::vector<double>{}), ContractViolation);
}

TEST_CASE("config text round trip and validation") {
  auto c = tiny_config();
  c.aggregation = Aggregation::kMedian;
  c.posterior_variance = diffusion::PosteriorVariance::kBetaBar;
  c.timestep_sampling = TimestepSampling::kPerSample;
  const auto text = format_train_config(c);
  CHECK(format_train_config(parse_train_config(text)) == text);
  CHECK_THROWS_AS(parse_train_config("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs = many\n"), ConfigError);
  auto bad = tiny_config();
  bad.past_frames = bad.window_length;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = tiny_config();
  bad.degree = 17;
  CHECK_NOTHROW(validate(bad));
  CHECK_THROWS_AS(Model(bad, 17, 2), ConfigError);
}

TEST_CASE("prepared windows are normalized and ordered") {
  const auto ds = tiny_dataset();
  const auto windows = prepare_windows(ds, tiny_config());
  CHECK(windows.size() == 2 * (16 - 6 + 1));
  for (const auto& w : windows) {
    CHECK(w.past.size() == 3 * ds.joints * 2);
    CHECK(w.future.size() == 3 * ds.joints * 2);
    CHECK(w.normalization.scale > 0.0);
  }
}

TEST_CASE("batch loss is reproducible and lambda1 = 0 silences the graph heads") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  const auto windows = prepare_windows(ds, cfg);
  std::vector<const PreparedWindow*> batch{&windows[0], &windows[5], &windows[9]};

  Model model(cfg, ds.joints, ds.channels);
  const auto a = batch_loss(model, batch, RngStream(4));
  const auto b = batch_loss(model, batch, RngStream(4));
  CHECK(a.total.item() == b.total.item());
  CHECK(a.move.class_id == b.move.class_id);
  CHECK(a.total.item() ==
        doctest::Approx(total_loss(a.graph.item(), a.puzzle.item(), a.diffusion.item(), cfg.lambda1, cfg.lambda2)));

  cfg.lambda1 = 0.0;
  Model silent(cfg, ds.joints, ds.channels);
  silent.params().zero_grad();
  batch_loss(silent, batch, RngStream(4)).total.backward();
  bool zero = false;
  CHECK(zero_grad_params(silent, "forecast.", &zero) == 4);
  CHECK(zero);
  CHECK(zero_grad_params(silent, "puzzle.", &zero) == 2);
  CHECK(zero);
  CHECK(zero_grad_params(silent, "denoiser.", &zero) > 0);
  CHECK_FALSE(zero);
  CHECK(zero_grad_params(silent, "condition.", &zero) == 2);
  CHECK_FALSE(zero);
  CHECK(zero_grad_params(silent, "graph.attention", &zero) == 1);
  CHECK_FALSE(zero);
  CHECK(zero_grad_params(silent, "graph.input_proj", &zero) == 1);
  CHECK_FALSE(zero);
}

TEST_CASE("training is bit-identical for equal seeds") {
  const auto ds = tiny_dataset();
  const auto cfg = tiny_config();
  const auto r1 = train(ds, cfg);
  const auto r2 = train(ds, cfg);
  REQUIRE(r1.history.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) CHECK(r1.history[e].total == r2.history[e].total);
  for (std::size_t i = 0; i < r1.model->params().size(); ++i) {
    const auto x = r1.model->params()[i].tensor.values();
    const auto y = r2.model->params()[i].tensor.values();
    CHECK(std::equal(x.begin(), x.end(), y.begin()));
  }
  const auto csv = format_loss_history(r1.history);
  CHECK(csv.rfind("epoch,total,graph,puzzle,diffusion\n", 0) == 0);
  CHECK_THROWS_AS(train(std::vector<PreparedWindow>{}, ds.joints, 2, cfg), ConfigError);
}

TEST_CASE("training reduces the loss") {
  const auto ds = tiny_dataset(10, 55, 5);
  auto cfg = tiny_config();
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  const auto windows = prepare_windows(ds, cfg);
  REQUIRE(windows.size() >= 500);
  const auto r = train(windows, ds.joints, ds.channels, cfg);
  CHECK(r.history.back().total < 0.5 * r.history.front().total);
}

TEST_CASE("scoring is deterministic, thread-independent and survives a checkpoint") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  const auto trained = train(ds, cfg);
  const auto windows = prepare_windows(ds, cfg);
  const auto seq = score_windows(*trained.model, windows, 3, Aggregation::kMin, 11, 1);
  const auto par = score_windows(*trained.model, windows, 3, Aggregation::kMin, 11, 3);
  REQUIRE(seq.size() == windows.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].generation_scores == par[i].generation_scores);
    CHECK(seq[i].aggregate == aggregate_scores(seq[i].generation_scores, Aggregation::kMin));
    CHECK(seq[i].origin.first_frame == windows[i].origin.first_frame);
  }
  const auto single = score_window(*trained.model, windows[4], 3, Aggregation::kMin, RngStream(11).split(4));
  CHECK(single.generation_scores == seq[4].generation_scores);

  const auto median = reaggregate(seq, Aggregation::kMedian);
  CHECK(median[0].aggregate == aggregate_scores(seq[0].generation_scores, Aggregation::kMedian));

  const auto path = std::filesystem::temp_directory_path() / "gicisad_pipeline_test.ckpt";
  save_model(path, *trained.model);
  const auto loaded = load_model(path);
  std::filesystem::remove(path);
  CHECK(loaded->joints() == ds.joints);
  CHECK(format_train_config(loaded->config()) == format_train_config(cfg));
  const auto again = score_windows(*loaded, windows, 3, Aggregation::kMin, 11, 1);
  for (std::size_t i = 0; i < seq.size(); ++i)
    for (std::size_t m = 0; m < 3; ++m)
      CHECK(again[i].generation_scores[m] == doctest::Approx(seq[i].generation_scores[m]).epsilon(1e-3));
}

TEST_CASE("non-finite parameters are reported by name") {
  const auto ds = tiny_dataset();
  Model model(tiny_config(), ds.joints, ds.channels);
  CHECK_NOTHROW(model.require_finite());
  for (auto& p : model.params())
    if (p.name == "condition.b") p.tensor.mutable_values()[0] = std::nan("");
  try {
    model.require_finite();
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("condition.b") != std::string::npos);
  }
}
