#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gicisad/diffusion/denoiser.hpp"
#include "gicisad/diffusion/schedule.hpp"
#include "gicisad/errors.hpp"
#include "gicisad/numerics/grad_check.hpp"
#include "gicisad/numerics/rng.hpp"

using namespace gicisad;
using namespace gicisad::diffusion;

namespace {

DenoiserConfig tiny_denoiser() {
  DenoiserConfig c;
  c.joints = 5;
  c.channels = 2;
  c.frames = 3;
  c.condition_dim = 4;
  c.channel_plan = {4, 4, 6, 6, 8, 4};
  c.pooled_joints = 3;
  c.time_embed_dim = 4;
  c.time_hidden = 6;
  return c;
}

// Independent cosine recipe.
std::vector<double> cosine_betas(std::size_t steps) {
  auto f = [&](double t) {
    const double arg = (t / static_cast<double>(steps) + 0.008) / 1.008 * std::numbers::pi / 2.0;
    return std::cos(arg) * std::cos(arg);
  };
  std::vector<double> out;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double ab = f(static_cast<double>(t)) / f(0.0);
    const double ab_prev = f(static_cast<double>(t - 1)) / f(0.0);
    out.push_back(std::min(1.0 - ab / ab_prev, 0.999));
  }
  return out;
}

}  // namespace

TEST_CASE("linear schedule endpoints and spacing") {
  const auto s = build_schedule(ScheduleKind::kLinear, 10, 1e-4, 0.01);
  CHECK(s.beta(1) == 1e-4);
  CHECK(s.beta(10) == 0.01);
  for (std::size_t t = 2; t <= 10; ++t) CHECK(s.beta(t) - s.beta(t - 1) == doctest::Approx(0.0099 / 9.0).epsilon(1e-9));
  CHECK(s.alpha_bar(0) == 1.0);
  double prod = 1.0;
  for (std::size_t t = 1; t <= 10; ++t) {
    prod *= 1.0 - s.beta(t);
    CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-15));
  }
  CHECK_THROWS_AS(build_schedule(ScheduleKind::kLinear, 10, 0.02, 0.01), ConfigError);
  CHECK_THROWS_AS(build_schedule(ScheduleKind::kLinear, 0), ConfigError);
}

TEST_CASE("cosine schedule matches the closed-form recipe") {
  for (std::size_t steps : {4u, 10u, 50u}) {
    const auto s = build_schedule(ScheduleKind::kCosine, steps);
    const auto ref = cosine_betas(steps);
    for (std::size_t t = 1; t <= steps; ++t) CHECK(std::abs(s.beta(t) - ref[t - 1]) < 1e-12);
    for (std::size_t t = 1; t <= steps; ++t) {
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) < 1.0);
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
  }
  CHECK(build_schedule(ScheduleKind::kCosine, 10).beta(10) == 0.999);
}

TEST_CASE("posterior variance beta_bar") {
  const auto s = build_schedule(ScheduleKind::kCosine, 10);
  CHECK(s.beta_bar(1) == 0.0);
  for (std::size_t t = 2; t <= 10; ++t) {
    CHECK(s.beta_bar(t) == doctest::Approx((1 - s.alpha_bar(t - 1)) / (1 - s.alpha_bar(t)) * s.beta(t)));
    CHECK(s.beta_bar(t) <= s.beta(t));
  }
  CHECK(parse_posterior_variance("beta_bar") == PosteriorVariance::kBetaBar);
  CHECK_THROWS_AS(parse_posterior_variance("sigma"), ConfigError);
  CHECK_THROWS_AS(parse_schedule_kind("custom"), ConfigError);
}

TEST_CASE("schedule table lists every step") {
  const auto text = format_schedule(build_schedule(ScheduleKind::kLinear, 3, 0.1, 0.3));
  CHECK(text.find("t,beta,alpha,alpha_bar,beta_bar") != std::string::npos);
  CHECK(text.find("\n3,0.3,") != std::string::npos);
}

TEST_CASE("forward corruption limits") {
  const auto s = build_schedule(ScheduleKind::kCosine, 10);
  const std::vector<double> x{1.0, -2.0, 0.5};
  const std::vector<double> zero(3, 0.0), eps{0.3, 0.1, -1.0};
  const auto quiet = forward_corrupt(x, 4, zero, s);
  for (std::size_t i = 0; i < 3; ++i) CHECK(quiet[i] == std::sqrt(s.alpha_bar(4)) * x[i]);
  CHECK(forward_corrupt(x, 0, eps, s) == x);
  const auto step = forward_step(x, 3, eps, s);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(step[i] == doctest::Approx(std::sqrt(1 - s.beta(3)) * x[i] + std::sqrt(s.beta(3)) * eps[i]));
}

TEST_CASE("iterated single steps reproduce the closed-form marginal") {
  const std::size_t steps = 10, draws = 100000;
  const auto s = build_schedule(ScheduleKind::kCosine, steps);
  const double x0 = 1.7;
  for (std::size_t target : {std::size_t{1}, steps / 2, steps}) {
    RngStream rng(target);
    double sum = 0, sum2 = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      std::vector<double> x{x0};
      for (std::size_t t = 1; t <= target; ++t) {
        const std::vector<double> e{rng.normal()};
        x = forward_step(x, t, e, s);
      }
      sum += x[0];
      sum2 += x[0] * x[0];
    }
    const double mean = sum / draws, sd = std::sqrt(sum2 / draws - mean * mean);
    const double want_mean = std::sqrt(s.alpha_bar(target)) * x0, want_sd = std::sqrt(1 - s.alpha_bar(target));
    INFO("t = " << target);
    CHECK(std::abs(mean - want_mean) <= 0.02 * std::max(std::abs(want_mean), want_sd));
    CHECK(std::abs(sd - want_sd) <= 0.02 * want_sd);
  }
}

TEST_CASE("reverse step on crafted scalars") {
  // beta_2 = 0.19 and alpha_bar_2 = 0.5.
  const auto s = schedule_from_betas({1.0 - 0.5 / 0.81, 0.19});
  CHECK(s.kind() == ScheduleKind::kCustom);
  CHECK(s.alpha_bar(2) == doctest::Approx(0.5).epsilon(1e-15));
  const std::vector<double> u{1.0}, eps_hat{0.2}, xi{0.0};
  const auto out = reverse_step(u, 2, eps_hat, s, xi);
  const double want = (1.0 / std::sqrt(0.81)) * (1.0 - (0.19 / std::sqrt(0.5)) * 0.2);
  CHECK(out[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(out[0] == doctest::Approx(1.05140).epsilon(1e-5));

  const std::vector<double> xi1{1.5};
  CHECK(reverse_step(u, 2, eps_hat, s, xi1)[0] == doctest::Approx(want + std::sqrt(0.19) * 1.5));
  CHECK(reverse_step(u, 2, eps_hat, s, xi1, PosteriorVariance::kBetaBar)[0] ==
        doctest::Approx(want + std::sqrt(s.beta_bar(2)) * 1.5));
  CHECK(reverse_step(u, 1, eps_hat, s, {})[0] ==
        doctest::Approx((1.0 - s.beta(1) / std::sqrt(1 - s.alpha_bar(1)) * 0.2) / std::sqrt(1 - s.beta(1))));
  CHECK_THROWS_AS(reverse_step(u, 3, eps_hat, s, xi), ContractViolation);
  CHECK_THROWS_AS(schedule_from_betas({0.5, 1.0}), ConfigError);
}

TEST_CASE("tiny beta leaves the sample almost unchanged") {
  const auto s = schedule_from_betas({1e-12, 1e-12});
  const std::vector<double> u{0.7, -3.0}, eps_hat{5.0, -2.0}, xi{0.0, 0.0};
  const auto out = reverse_step(u, 2, eps_hat, s, xi, PosteriorVariance::kBetaBar);
  CHECK(out[0] == doctest::Approx(0.7).epsilon(1e-5));
  CHECK(out[1] == doctest::Approx(-3.0).epsilon(1e-5));
}

TEST_CASE("timestep embedding") {
  const auto zero = timestep_embedding(0.0, 16);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(zero[2 * i] == 0.0);
    CHECK(zero[2 * i + 1] == 1.0);
  }
  const auto e3 = timestep_embedding(3.0, 4);
  CHECK(e3[0] == doctest::Approx(std::sin(3.0)));
  CHECK(e3[3] == doctest::Approx(std::cos(3.0 / 100.0)));
  std::vector<std::vector<double>> all;
  for (std::size_t t = 1; t <= 10; ++t) {
    all.push_back(timestep_embedding(static_cast<double>(t), 16));
    for (double v : all.back()) CHECK(std::abs(v) <= 1.0);
  }
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      double d = 0;
      for (std::size_t i = 0; i < 16; ++i) d += (all[a][i] - all[b][i]) * (all[a][i] - all[b][i]);
      CHECK(d > 0.0);
    }
  CHECK_THROWS_AS(timestep_embedding(1.0, 5), ContractViolation);
}

TEST_CASE("diffusion loss knee values") {
  auto loss_for_norm = [](double norm) {
    const Tensor eps({1, 2}, {norm, 0.0});
    const Tensor zero({1, 2}, {0.0, 0.0});
    return diffusion_loss(eps, zero).item();
  };
  CHECK(loss_for_norm(0.0) == 0.0);
  CHECK(loss_for_norm(0.5) == 0.125);
  CHECK(loss_for_norm(1.0) == 0.5);
  CHECK(loss_for_norm(2.0) == 1.5);
  // Batch of two with norms 3 and 5: mean 4, smooth 3.5.
  const Tensor eps({2, 2}, {3, 0, 0, 5});
  const Tensor zero({2, 2}, {0, 0, 0, 0});
  CHECK(noise_norm(eps, zero).item() == doctest::Approx(4.0));
  CHECK(diffusion_loss(eps, zero).item() == doctest::Approx(3.5));
  CHECK_THROWS_AS(diffusion_loss(eps, Tensor({2, 3})), ContractViolation);
}

TEST_CASE("normalized skeleton is symmetric with unit-sum self loops on a chain") {
  const auto bones = skeleton_bones(4);
  CHECK(bones.size() == 3);
  const auto m = normalized_skeleton(4, bones);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(m[i * 4 + j] == doctest::Approx(m[j * 4 + i]));
  CHECK(m[0] == doctest::Approx(0.5));                        // degree 2 with the self loop
  CHECK(m[1] == doctest::Approx(1.0 / std::sqrt(2.0 * 3.0)));  // 2 and 3
  CHECK(skeleton_bones(17).size() == 18);
}

TEST_CASE("denoiser output shape, determinism and conditioning sensitivity") {
  const auto c = tiny_denoiser();
  RngStream rng(1);
  Denoiser d(c, rng);
  RngStream data(2);
  const Tensor noisy({2, 3, 5, 2}, data.normal_vector(60));
  const Tensor cond({2, 4}, data.normal_vector(8));
  const auto a = d.predict(noisy, {1, 4}, cond);
  const auto b = d.predict(noisy, {1, 4}, cond);
  CHECK(a.shape() == Shape{2, 3, 5, 2});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.at(i) == b.at(i));
  auto shifted = cond.detach();
  shifted.mutable_values()[1] += 0.5;
  const auto moved = d.predict(noisy, {1, 4}, shifted);
  double delta = 0;
  for (std::size_t i = 0; i < 30; ++i) delta = std::max(delta, std::abs(moved.at(i) - a.at(i)));
  CHECK(delta > 0.0);
  CHECK_THROWS_AS(d.predict(noisy, {1}, cond), ContractViolation);
}

TEST_CASE("denoiser gradients match finite differences") {
  const auto c = tiny_denoiser();
  RngStream rng(3);
  Denoiser d(c, rng);
  RngStream data(4);
  for (auto& p : d.params())
    for (double& x : p.tensor.mutable_values()) x += 0.05 * data.normal();
  const Tensor noisy({2, 3, 5, 2}, data.normal_vector(60));
  const Tensor cond({2, 4}, data.normal_vector(8));
  const auto report = grad_check([&] { return sum(square(d.predict(noisy, {2, 3}, cond))); }, d.params());
  for (const auto& e : report.entries) {
    INFO(e.name << " analytic " << e.analytic << " numeric " << e.numeric);
    CHECK(e.max_rel_error < 1e-4);
  }
}

TEST_CASE("sampling is reproducible per stream and diverse across streams") {
  const auto c = tiny_denoiser();
  RngStream rng(5);
  Denoiser d(c, rng);
  const auto s = build_schedule(ScheduleKind::kCosine, 4);
  const Tensor cond({1, 4}, {0.1, -0.2, 0.3, 0.4});
  RngStream r1(9), r2(9);
  const auto a = sample_future(d, cond, s, r1);
  const auto b = sample_future(d, cond, s, r2);
  CHECK(a == b);
  CHECK(a.size() == 30);

  const RngStream root(10);
  std::vector<RngStream> streams{root.split(1), root.split(2)};
  const auto batch = sample_futures(d, cond, s, streams);
  RngStream alone = root.split(2);
  const auto single = sample_future(d, cond, s, alone);
  double diff = 0;
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(batch[30 + i] == doctest::Approx(single[i]).epsilon(1e-12));
    diff = std::max(diff, std::abs(batch[i] - batch[30 + i]));
  }
  CHECK(diff > 0.0);
}

TEST_CASE("reverse chain with the optimal denoiser recovers a Gaussian's mean") {
  // Data x0 ~ N(mu, sd^2); the posterior-mean noise predictor is linear.
  const double mu = 2.0, sd = 0.5;
  const auto s = build_schedule(ScheduleKind::kCosine, 10);
  RngStream rng(11);
  const std::size_t draws = 10000;
  double total = 0;
  for (std::size_t n = 0; n < draws; ++n) {
    std::vector<double> u{rng.normal()};
    for (std::size_t t = 10; t >= 1; --t) {
      const double ab = s.alpha_bar(t);
      const double eps = std::sqrt(1 - ab) * (u[0] - std::sqrt(ab) * mu) / (ab * sd * sd + 1 - ab);
      const std::vector<double> xi{t > 1 ? rng.normal() : 0.0};
      u = reverse_step(u, t, std::vector<double>{eps}, s, xi, PosteriorVariance::kBetaBar);
    }
    total += u[0];
  }
  CHECK(std::abs(total / draws - mu) < 0.05 * mu);
}
