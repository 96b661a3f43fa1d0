#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gicisad/diffusion/schedule.hpp"
#include "gicisad/errors.hpp"
#include "gicisad/eval/eval.hpp"
#include "gicisad/graph/adjacency.hpp"
#include "gicisad/jigsaw/jigsaw.hpp"
#include "gicisad/numerics/allocator.hpp"
#include "gicisad/numerics/grad_check.hpp"
#include "gicisad/pipeline/score.hpp"
#include "gicisad/pipeline/train.hpp"
#include "gicisad/pose/synthetic.hpp"

using namespace gicisad;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED: " << what << ";";
    }
  }
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------- 1

void exact_values(Outcome& o) {
  const Tensor x({4}, {0.0, 0.5, 1.0, 2.0});
  const Tensor s = smooth_l1(x);
  o.require(s.at(0) == 0.0 && s.at(1) == 0.125 && s.at(2) == 0.5 && s.at(3) == 1.5, "smooth-L1 knee values");

  const Tensor logits({1, 6}, std::vector<double>(6, 0.37));
  const std::vector<std::size_t> target{2};
  o.require(near(cross_entropy(logits, target).item(), std::log(6.0), 1e-9), "uniform cross-entropy = ln 6");

  o.require(jigsaw::class_count(jigsaw::PuzzleKind::kInter, 4) == 6, "C(4,2) = 6 puzzle classes");

  const auto lin = diffusion::build_schedule(diffusion::ScheduleKind::kLinear, 10, 1e-4, 0.01);
  o.require(lin.beta(1) == 1e-4 && lin.beta(10) == 0.01, "linear schedule endpoints");

  o.require(near(pipeline::multi_actor_score(std::vector<double>{1.0, 3.0}), 2.0 + std::log(2.0), 1e-9),
            "multi-actor fusion {1,3}");

  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
  o.require(eval::auroc(scores, {false, false, true, true}).auroc == 0.75, "AUROC oracle case");
  o.detail << " smooth-L1, CE, classes, schedule, fusion, AUROC checked";
}

// ---------------------------------------------------------------- 2

void gradient_acceptance(Outcome& o) {
  pipeline::TrainConfig cfg;
  cfg.embed_dim = 4;
  cfg.degree = 2;
  cfg.subgraphs = 2;
  cfg.forecast_hidden = 8;
  cfg.diffusion_steps = 4;
  cfg.past_frames = 3;
  cfg.window_length = 6;
  cfg.denoiser_channels = {4, 4, 6, 6, 8, 4};
  cfg.pooled_joints = 3;
  cfg.time_embed_dim = 4;
  cfg.time_hidden = 6;
  cfg.lambda1 = 0.5;
  cfg.lambda2 = 1.0;
  cfg.seed = 3;
  pipeline::Model model(cfg, 5, 2);

  RngStream perturb(4);
  for (auto& p : model.params())
    for (double& v : p.tensor.mutable_values()) v += 0.05 * perturb.normal();

  RngStream data(5);
  std::vector<pipeline::PreparedWindow> windows(3);
  for (auto& w : windows) {
    w.past = data.normal_vector(3 * 5 * 2);
    w.future = data.normal_vector(3 * 5 * 2);
  }
  std::vector<const pipeline::PreparedWindow*> batch;
  for (const auto& w : windows) batch.push_back(&w);

  const auto report = grad_check(
      [&] { return pipeline::batch_loss(model, batch, RngStream(6)).total; }, model.params());
  std::size_t scalars = 0;
  for (const auto& e : report.entries) {
    o.require(e.max_rel_error < 1e-4, e.name + " rel err " + std::to_string(e.max_rel_error));
    scalars += model.params().find(e.name)->tensor.size();
  }
  o.detail << " " << report.entries.size() << " tensors, " << scalars
           << " scalars, max rel err " << std::scientific << std::setprecision(2) << report.max_rel_error()
           << std::defaultfloat;
}

// ---------------------------------------------------------------- 3

void diffusion_bookkeeping(Outcome& o) {
  const std::size_t steps = 10, draws = 100000;
  const auto s = diffusion::build_schedule(diffusion::ScheduleKind::kCosine, steps);
  auto f = [&](double t) {
    const double arg = (t / static_cast<double>(steps) + 0.008) / 1.008 * std::numbers::pi / 2.0;
    return std::cos(arg) * std::cos(arg);
  };
  double worst_beta = 0.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double ref = std::min(1.0 - f(static_cast<double>(t)) / f(static_cast<double>(t - 1)), 0.999);
    worst_beta = std::max(worst_beta, std::abs(s.beta(t) - ref));
  }
  o.require(worst_beta <= 1e-12, "cosine betas");

  const double x0 = 0.8;
  double worst = 0.0;
  for (std::size_t target : {std::size_t{1}, steps / 2, steps}) {
    RngStream rng(100 + target);
    double sum = 0, sum2 = 0;
    std::vector<double> x(1), e(1);
    for (std::size_t d = 0; d < draws; ++d) {
      x[0] = x0;
      for (std::size_t t = 1; t <= target; ++t) {
        e[0] = rng.normal();
        x = diffusion::forward_step(x, t, e, s);
      }
      sum += x[0];
      sum2 += x[0] * x[0];
    }
    const double mean = sum / draws, sd = std::sqrt(sum2 / draws - mean * mean);
    const double want_mean = std::sqrt(s.alpha_bar(target)) * x0, want_sd = std::sqrt(1.0 - s.alpha_bar(target));
    const double mean_err = std::abs(mean - want_mean) / std::max(std::abs(want_mean), want_sd);
    const double sd_err = std::abs(sd - want_sd) / want_sd;
    worst = std::max({worst, mean_err, sd_err});
    o.require(mean_err <= 0.02 && sd_err <= 0.02, "moments at t=" + std::to_string(target));
  }
  o.detail << " cosine max |dbeta| " << worst_beta << ", worst moment error " << std::fixed
           << std::setprecision(4) << 100.0 * worst << "%" << std::defaultfloat;
}

// ---------------------------------------------------------------- 4

std::vector<unsigned char> conjugate(const graph::Adjacency& a, const std::vector<std::size_t>& perm) {
  const std::size_t k = a.nodes;
  std::vector<unsigned char> out(k * k, 0);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c) out[perm[r] * k + perm[c]] = a.matrix[r * k + c];
  return out;
}

void permutation_algebra(Outcome& o) {
  std::size_t equal_size = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);
    const auto v = graph::init_embeddings(12, 8, rng);
    const auto a = graph::build_adjacency({v, 12, 8}, 3);
    const auto parts = jigsaw::extract_subgraphs(a, 4);
    RngStream shuffle_rng(500 + seed);
    const auto r = jigsaw::shuffle_inter(a, parts, shuffle_rng);
    o.require(r.permuted.matrix == conjugate(a, r.move.permutation), "P A P^T, seed " + std::to_string(seed));
    for (std::size_t k = 0; k < 12; ++k) o.require(r.permuted.row_sum(k) == 3, "row sum");
    const auto members = parts.members();
    if (members[r.move.first].size() == members[r.move.second].size()) {
      ++equal_size;
      o.require(jigsaw::apply_permutation(r.permuted, r.move.permutation).matrix == a.matrix, "involution");
    }
  }
  o.require(equal_size > 0, "some equal-size pair drawn");

  graph::Adjacency cliques;
  cliques.nodes = 8;
  cliques.degree = 3;
  cliques.matrix.assign(64, 0);
  cliques.similarity.assign(64, 0.0);
  const std::vector<std::vector<std::size_t>> rows{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 4},
                                                   {3, 5, 6}, {4, 6, 7}, {4, 5, 7}, {4, 5, 6}};
  for (std::size_t k = 0; k < 8; ++k)
    for (auto n : rows[k]) cliques.matrix[k * 8 + n] = 1;
  const auto p = jigsaw::extract_subgraphs(cliques, 2);
  o.require(p.assignment == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1}, "two-clique partition");
  o.detail << " 100 graphs, " << equal_size << " equal-size involutions, cliques recovered";
}

// ---------------------------------------------------------------- 5-8

pipeline::TrainConfig benchmark_config(std::uint64_t seed) {
  pipeline::TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 16;
  cfg.epochs = 40;
  cfg.timestep_sampling = pipeline::TimestepSampling::kPerSample;
  cfg.seed = seed;
  return cfg;
}

struct Benchmark {
  pose::PoseDataset train;
  pose::PoseDataset test;
  pose::LabelSet labels;
};

// Normal training videos; half of the test videos carry one anomaly span
// over a fifth of their frames, so a tenth of the test frames are anomalous.
Benchmark make_benchmark(std::uint64_t seed) {
  Benchmark b;
  pose::SyntheticSpec train;
  train.seed = seed * 10 + 1;
  train.videos = 12;
  train.frames = 100;
  b.train = pose::generate_synthetic(train).dataset;

  bool first = true;
  for (auto [kind, prefix, offset] : {std::tuple{pose::AnomalyKind::kRegionFreeze, "f", 2},
                                      std::tuple{pose::AnomalyKind::kRegionJitter, "j", 3}}) {
    pose::SyntheticSpec spec;
    spec.seed = seed * 10 + static_cast<std::uint64_t>(offset);
    spec.video_prefix = prefix;
    spec.videos = 4;
    spec.frames = 80;
    spec.anomaly_kind = kind;
    spec.anomaly_region = pose::BodyRegion::kLeftArm;
    spec.anomaly_videos = {0, 1};
    spec.anomaly_rate = 0.2;
    auto data = pose::generate_synthetic(spec);
    if (first) {
      b.test = std::move(data.dataset);
      first = false;
    } else {
      b.test.merge(data.dataset);
    }
    b.labels.merge(data.labels);
  }
  return b;
}

struct RunResult {
  double auroc = 0.0;
  double seconds = 0.0;
  std::vector<pipeline::ScoreRecord> records;
  std::vector<eval::VideoExtent> extents;
  std::size_t window_length = 0;
  std::size_t past_frames = 0;
};

RunResult run_benchmark(const Benchmark& b, const pipeline::TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto trained = pipeline::train(b.train, cfg);
  const auto windows = pipeline::prepare_windows(b.test, cfg);
  RunResult r;
  r.records = pipeline::score_windows(*trained.model, windows, cfg.generations, cfg.aggregation, cfg.seed);
  r.extents = eval::video_extents(b.test);
  r.window_length = cfg.window_length;
  r.past_frames = cfg.past_frames;
  const auto frames = eval::flatten(eval::frame_scores(r.records, r.extents, cfg.window_length, cfg.past_frames));
  r.auroc = eval::auroc(frames, b.labels).auroc;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double strategy_auroc(const RunResult& run, const Benchmark& b, pipeline::Aggregation strategy) {
  const auto records = pipeline::reaggregate(run.records, strategy);
  const auto frames = eval::flatten(eval::frame_scores(records, run.extents, run.window_length, run.past_frames));
  return eval::auroc(frames, b.labels).auroc;
}

struct Study {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<Benchmark> benchmarks;
  std::vector<RunResult> full;
  std::vector<RunResult> no_puzzle;
};

void end_to_end(Outcome& o, Study& study) {
  double total = 0.0, seconds = 0.0;
  std::size_t train_windows = 0;
  for (auto seed : study.seeds) {
    study.benchmarks.push_back(make_benchmark(seed));
    const auto& b = study.benchmarks.back();
    train_windows = pipeline::prepare_windows(b.train, benchmark_config(seed)).size();
    study.full.push_back(run_benchmark(b, benchmark_config(seed)));
    const auto& r = study.full.back();
    total += r.auroc;
    seconds += r.seconds;
    o.detail << " seed " << seed << " auroc " << std::fixed << std::setprecision(4) << r.auroc << " ("
             << std::setprecision(0) << r.seconds << " s);" << std::defaultfloat;
  }
  const auto& b = study.benchmarks.front();
  o.require(train_windows >= 500, "at least 500 training windows");
  o.require(b.test.joints == 17, "17 joints");
  const double frac = static_cast<double>(b.labels.anomalous_count()) / static_cast<double>(b.labels.size());
  o.require(near(frac, 0.1, 1e-9), "10% anomalous test frames");
  const double mean = total / static_cast<double>(study.seeds.size());
  o.require(mean >= 0.80, "mean AUROC >= 0.80");
  o.require(seconds < 600.0, "runtime under 10 minutes");
  o.detail << " mean " << std::fixed << std::setprecision(4) << mean << ", " << train_windows
           << " training windows, anomalous fraction " << std::setprecision(3) << frac << std::defaultfloat;
}

void ablation(Outcome& o, Study& study) {
  std::size_t wins = 0;
  for (std::size_t i = 0; i < study.seeds.size(); ++i) {
    auto cfg = benchmark_config(study.seeds[i]);
    cfg.use_puzzle = false;
    study.no_puzzle.push_back(run_benchmark(study.benchmarks[i], cfg));
    const double full = study.full[i].auroc, ablated = study.no_puzzle.back().auroc;
    if (full >= ablated) ++wins;
    o.detail << " seed " << study.seeds[i] << " full " << std::fixed << std::setprecision(4) << full
             << " vs no-puzzle " << ablated << ";" << std::defaultfloat;
  }
  o.require(wins >= 2, "full model ahead in at least 2 of 3 seeds");
  o.detail << " full >= no-puzzle in " << wins << " of " << study.seeds.size();
}

void aggregation_study(Outcome& o, const Study& study) {
  using pipeline::Aggregation;
  std::size_t checked = 0;
  for (const auto& run : study.full)
    for (const auto& r : run.records) {
      const auto& s = r.generation_scores;
      const double lo = pipeline::aggregate_scores(s, Aggregation::kMin);
      const double hi = pipeline::aggregate_scores(s, Aggregation::kMax);
      const double med = pipeline::aggregate_scores(s, Aggregation::kMedian);
      const double avg = pipeline::aggregate_scores(s, Aggregation::kMean);
      o.require(lo <= med && med <= hi && lo <= avg && avg <= hi, "order statistics");
      ++checked;
    }
  o.detail << " " << checked << " records ordered; AUROC";
  for (auto strategy : {Aggregation::kMin, Aggregation::kMean, Aggregation::kMedian, Aggregation::kMax}) {
    double total = 0.0;
    for (std::size_t i = 0; i < study.full.size(); ++i)
      total += strategy_auroc(study.full[i], study.benchmarks[i], strategy);
    o.detail << " " << pipeline::to_string(strategy) << " " << std::fixed << std::setprecision(4)
             << total / static_cast<double>(study.full.size()) << std::defaultfloat;
  }
}

void determinism(Outcome& o) {
  auto cfg = benchmark_config(21);
  cfg.epochs = 3;
  cfg.generations = 5;
  pose::SyntheticSpec spec;
  spec.seed = 21;
  spec.videos = 3;
  spec.frames = 40;
  const auto data = pose::generate_synthetic(spec).dataset;
  const auto first = pipeline::train(data, cfg);
  const auto second = pipeline::train(data, cfg);
  o.require(pipeline::format_loss_history(first.history) == pipeline::format_loss_history(second.history),
            "identical loss history");

  const auto windows = pipeline::prepare_windows(data, cfg);
  auto csv = [&](const pipeline::Model& model, std::size_t threads, std::vector<pipeline::ScoreRecord>* out) {
    auto records = pipeline::score_windows(model, windows, cfg.generations, cfg.aggregation, cfg.seed, threads);
    const auto frames = eval::flatten(eval::frame_scores(records, eval::video_extents(data), 6, 3));
    if (out) *out = records;
    return eval::format_frame_scores(frames);
  };
  std::vector<pipeline::ScoreRecord> seq, par;
  const auto a = csv(*first.model, 1, &seq);
  const auto b = csv(*second.model, 1, nullptr);
  const auto c = csv(*first.model, 4, &par);
  o.require(a == b, "identical score CSV across runs");
  o.require(a == c, "identical score CSV with 4 workers");
  bool same = seq.size() == par.size();
  for (std::size_t i = 0; same && i < seq.size(); ++i) same = seq[i].generation_scores == par[i].generation_scores;
  o.require(same, "parallel records equal sequential records");
  o.detail << " " << first.history.size() << " epochs and " << seq.size() << " windows x " << cfg.generations
           << " generations compared bit for bit";
}

void parameter_accounting(Outcome& o) {
  const pipeline::Model model(pipeline::TrainConfig{}, 17, 2);
  const auto breakdown = eval::param_count(model.params());
  o.require(breakdown.total >= 50000 && breakdown.total <= 200000, "total within [50K, 200K]");
  o.require(breakdown.modules.size() >= 4, "per-module breakdown");
  o.detail << " total " << breakdown.total << " (";
  for (std::size_t i = 0; i < breakdown.modules.size(); ++i)
    o.detail << (i ? ", " : "") << breakdown.modules[i].first << " " << breakdown.modules[i].second;
  o.detail << ")";
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance checks, one line per criterion"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  const bool need_study = wanted(5) || wanted(6) || wanted(7);

  Study study;
  bool all = true;
  auto run = [&](int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    if (!wanted(id) && !(id == 5 && need_study)) return;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " error: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << " (" << std::fixed
              << std::setprecision(2) << secs << " s)" << std::defaultfloat << ":" << o.detail.str() << std::endl;
  };

  run(1, "exact-value unit suite", exact_values);
  run(2, "gradient acceptance", gradient_acceptance);
  run(3, "diffusion bookkeeping", diffusion_bookkeeping);
  run(4, "permutation algebra", permutation_algebra);
  run(5, "end-to-end synthetic detection", [&](Outcome& o) { end_to_end(o, study); });
  if (wanted(6)) {
    run(6, "ablation direction", [&](Outcome& o) {
      if (study.full.size() != study.seeds.size()) throw EvaluationError("end-to-end runs missing");
      ablation(o, study);
    });
  }
  if (wanted(7)) {
    run(7, "aggregation study", [&](Outcome& o) {
      if (study.full.size() != study.seeds.size()) throw EvaluationError("end-to-end runs missing");
      aggregation_study(o, study);
    });
  }
  run(8, "determinism", determinism);
  run(9, "parameter accounting", parameter_accounting);
  std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return all ? 0 : 1;
}
