#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "gicisad/errors.hpp"
#include "gicisad/eval/eval.hpp"
#include "gicisad/pipeline/model.hpp"
#include "oracles.hpp"

using namespace gicisad;
using namespace gicisad::eval;

namespace {

pipeline::ScoreRecord record(const std::string& video, const std::string& actor, std::int64_t first, double s) {
  pipeline::ScoreRecord r;
  r.origin.video_id = video;
  r.origin.actor_id = actor;
  r.origin.first_frame = first;
  r.generation_scores = {s};
  r.aggregate = s;
  return r;
}

std::vector<std::pair<double, double>> parse_curve(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "fpr,tpr");
  std::vector<std::pair<double, double>> curve;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    curve.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  return curve;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("AUROC hand cases") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<bool> y{false, false, true, true};
  CHECK(auroc(s, y).auroc == 0.75);
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.9, 0.95}, y).auroc == 1.0);
  CHECK(auroc(std::vector<double>{3, 3, 3, 3}, y).auroc == 0.5);
  CHECK(auroc(std::vector<double>{1, 2, 3, 4}, {true, true, false, false}).auroc == 0.0);
  const auto r = auroc(s, y);
  CHECK(r.positives == 2);
  CHECK(r.negatives == 2);
  CHECK(r.curve.front() == std::make_pair(0.0, 0.0));
  CHECK(r.curve.back() == std::make_pair(1.0, 1.0));
  try {
    auroc(std::vector<double>{1, 2}, {false, false});
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(std::string(e.what()).find("anomalous") != std::string::npos);
  }
  CHECK_THROWS_AS(auroc(std::vector<double>{1, 2}, {true, true}), EvaluationError);
}

TEST_CASE("AUROC matches pairwise counting and the curve area on random data") {
  RngStream rng(2);
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.uniform_index(60);
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(8));  // many ties
      y[i] = i < 2 ? i == 0 : rng.uniform() < 0.3;
    }
    const auto r = auroc(s, y);
    CHECK(r.auroc == doctest::Approx(oracle::pairwise_auroc(s, y)).epsilon(1e-12));
    CHECK(curve_area(r.curve) == doctest::Approx(r.auroc).epsilon(1e-12));
    for (std::size_t i = 1; i < r.curve.size(); ++i) {
      CHECK(r.curve[i].first >= r.curve[i - 1].first);
      CHECK(r.curve[i].second >= r.curve[i - 1].second);
    }
    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(auroc(warped, y).auroc == r.auroc);
  }
}

TEST_CASE("single window fills its future frames and the edges") {
  const std::vector<VideoExtent> ext{{"v", 0, 7}};
  const auto series = frame_scores({record("v", "a0", 0, 2.5)}, ext, 6, 3);
  REQUIRE(series.size() == 1);
  CHECK(series[0].first_frame == 0);
  CHECK(series[0].scores == std::vector<double>(8, 2.5));
  CHECK(series[0].coverage == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 0, 0});
}

TEST_CASE("overlapping windows are averaged and actors fused") {
  const std::vector<VideoExtent> ext{{"v", 0, 6}};
  const auto two = frame_scores({record("v", "a0", 0, 1.0), record("v", "a0", 1, 3.0)}, ext, 6, 3);
  CHECK(two[0].scores[3] == 1.0);
  CHECK(two[0].scores[4] == 2.0);
  CHECK(two[0].scores[5] == 2.0);
  CHECK(two[0].scores[6] == 3.0);
  CHECK(two[0].scores[0] == 1.0);

  const auto fused = frame_scores({record("v", "a0", 0, 1.0), record("v", "a1", 0, 3.0)}, ext, 6, 3);
  CHECK(fused[0].scores[4] == doctest::Approx(2.0 + std::log(2.0)).epsilon(1e-12));
  CHECK(fused[0].coverage[4] == 1);

  CHECK_THROWS_AS(frame_scores({record("w", "a0", 0, 1.0)}, ext, 6, 3), DataError);
}

TEST_CASE("stride-one windows cover a whole track and frame scores are linear") {
  const std::vector<VideoExtent> ext{{"v", 10, 29}};
  std::vector<pipeline::ScoreRecord> recs, scaled;
  RngStream rng(4);
  for (std::int64_t f = 10; f + 5 <= 29; ++f) {
    const double s = rng.uniform();
    recs.push_back(record("v", "a0", f, s));
    scaled.push_back(record("v", "a0", f, 3.0 * s));
  }
  const auto a = frame_scores(recs, ext, 6, 3);
  const auto b = frame_scores(scaled, ext, 6, 3);
  REQUIRE(a[0].scores.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(b[0].scores[i] == doctest::Approx(3.0 * a[0].scores[i]).epsilon(1e-12));
    if (i >= 3) CHECK(a[0].coverage[i] >= 1);
  }
  const auto flat = flatten(a);
  CHECK(flat.size() == 20);
  CHECK(flat.front().frame == 10);
  const auto back = parse_frame_scores(format_frame_scores(flat));
  REQUIRE(back.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(back[i].score == flat[i].score);
}

TEST_CASE("video extents span every actor") {
  pose::PoseDataset ds;
  ds.joints = 1;
  ds.tracks.push_back({"v", "a0", 2, 1, 2, {0, 0, 1, 1}});
  ds.tracks.push_back({"v", "a1", 0, 1, 2, {0, 0}});
  const auto ext = video_extents(ds);
  REQUIRE(ext.size() == 1);
  CHECK(ext[0].first_frame == 0);
  CHECK(ext[0].last_frame == 3);
}

TEST_CASE("label join and report files") {
  pose::LabelSet labels;
  std::vector<FrameScore> scores;
  for (std::int64_t f = 0; f < 10; ++f) {
    labels.add({"v", f, f >= 7});
    scores.push_back({"v", f, f == 8 ? 0.1 : 0.1 * static_cast<double>(f)});
  }
  const auto roc = auroc(scores, labels);
  CHECK(roc.positives == 3);
  CHECK(roc.auroc == doctest::Approx(oracle::pairwise_auroc(
                                         std::vector<double>{0, .1, .2, .3, .4, .5, .6, .7, .1, .9},
                                         {false, false, false, false, false, false, false, true, true, true})));

  const auto dir = std::filesystem::temp_directory_path() / "gicisad_eval_test";
  std::filesystem::remove_all(dir);
  emit_report(scores, labels, roc, dir);
  const auto curve = parse_curve(pose::read_text_file(dir / "roc.csv"));
  CHECK(std::abs(curve_area(curve) - roc.auroc) < 1e-9);
  const auto first = pose::read_text_file(dir / "histogram.svg");
  CHECK(count_of(first, "class=\"anomalous\"") == 1);
  CHECK(pose::read_text_file(dir / "scores.csv").rfind("video_id,frame,score,label\n", 0) == 0);
  emit_report(scores, labels, roc, dir);
  CHECK(pose::read_text_file(dir / "histogram.svg") == first);
  std::filesystem::remove_all(dir);

  auto missing = scores;
  missing.push_back({"v", 99, 1.0});
  CHECK_THROWS_AS(auroc(missing, labels), DataError);
}

TEST_CASE("histogram with no anomalies draws only the normal series") {
  const std::vector<double> normal{0.1, 0.2, 0.2, 0.5};
  const auto svg = histogram_svg(normal, {});
  CHECK(count_of(svg, "class=\"normal\"") == 1);
  CHECK(count_of(svg, "class=\"anomalous\"") == 0);
  CHECK(svg.rfind("<svg", 0) == 0);
}

TEST_CASE("parameter accounting") {
  ParamSet one;
  one.add("graph.input_proj", {16, 6}, std::vector<double>(96, 0.0));
  CHECK(param_count(one).total == 96);

  pipeline::TrainConfig cfg;
  const pipeline::Model model(cfg, 17, 2);
  const auto base = param_count(model.params());
  CHECK(base.total >= 50000);
  CHECK(base.total <= 200000);
  std::size_t sum = 0;
  for (const auto& [name, n] : base.modules) sum += n;
  CHECK(sum == base.total);
  CHECK(base.modules.front().first == "graph");
  CHECK(format_param_breakdown(base).find("total") != std::string::npos);

  cfg.embed_dim = 32;
  CHECK(param_count(pipeline::Model(cfg, 17, 2).params()).total > base.total);
}
