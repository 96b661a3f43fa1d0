#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "gicisad/errors.hpp"
#include "gicisad/numerics/adam.hpp"
#include "gicisad/numerics/checkpoint.hpp"
#include "gicisad/numerics/grad_check.hpp"
#include "gicisad/numerics/params.hpp"
#include "gicisad/numerics/rng.hpp"
#include "gicisad/numerics/tensor.hpp"
#include "oracles.hpp"

using namespace gicisad;

namespace {

std::vector<double> ramp(std::size_t n, double start, double step) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + step * static_cast<double>(i);
  return v;
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.5, double hi = 1.5) {
  RngStream rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

void check_grads(const std::function<Tensor()>& loss, ParamSet& params, double tol = 1e-5) {
  const auto report = grad_check(loss, params);
  for (const auto& e : report.entries) {
    INFO(e.name << " index " << e.worst_index << " analytic " << e.analytic << " numeric " << e.numeric);
    CHECK(e.max_rel_error < tol);
  }
}

}  // namespace

TEST_CASE("elementwise values follow numpy broadcasting") {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b({3}, {10, 20, 30});
  const Tensor sum_ab = add(a, b);
  const auto s = sum_ab.values();
  CHECK(std::vector<double>(s.begin(), s.end()) == std::vector<double>{11, 22, 33, 14, 25, 36});
  const Tensor c({2, 1}, {2, -1});
  const Tensor prod = mul(a, c);
  const auto m = prod.values();
  CHECK(std::vector<double>(m.begin(), m.end()) == std::vector<double>{2, 4, 6, -4, -5, -6});
  CHECK_THROWS_AS(add(a, Tensor({2}, {1, 2})), ContractViolation);
}

TEST_CASE("matmul against a hand product") {
  const Tensor x({2, 2}, {1, 2, 3, 4});
  const Tensor w({2, 3}, {1, 0, -1, 2, 1, 0});
  const auto y = matmul(x, w);
  CHECK(y.shape() == Shape{2, 3});
  const auto v = y.values();
  CHECK(std::vector<double>(v.begin(), v.end()) == std::vector<double>{5, 2, -1, 11, 4, -3});
}

TEST_CASE("mix applies a matrix along an inner axis") {
  // x is (1, 2, 2): rows r0 = (1, 2), r1 = (3, 4); m swaps and scales rows.
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  const Tensor m({3, 2}, {0, 1, 2, 0, 1, 1});
  const auto y = mix(x, m, 1);
  CHECK(y.shape() == Shape{1, 3, 2});
  const auto v = y.values();
  CHECK(std::vector<double>(v.begin(), v.end()) == std::vector<double>{3, 4, 2, 4, 4, 6});
}

TEST_CASE("smooth L1 knee values") {
  const Tensor x({4}, {0.0, 0.5, 1.0, 2.0});
  const Tensor out = smooth_l1(x);
  const auto y = out.values();
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.125);
  CHECK(y[2] == 0.5);
  CHECK(y[3] == 1.5);
  for (double v : ramp(41, -3.0, 0.15)) {
    CHECK(smooth_l1(Tensor::scalar(v)).item() == doctest::Approx(oracle::smooth_l1(v)).epsilon(1e-15));
  }
}

TEST_CASE("cross-entropy of uniform logits is log of the class count") {
  const Tensor logits = Tensor::full({1, 6}, 0.37);
  const std::vector<std::size_t> target{4};
  CHECK(std::abs(cross_entropy(logits, target).item() - std::log(6.0)) < 1e-9);
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<std::size_t>{6}), ContractViolation);
}

TEST_CASE("masked softmax zeroes masked entries and normalizes rows") {
  const std::vector<unsigned char> mask{1, 0, 1, 1, 1, 0, 0, 0, 1};
  const Tensor logits({3, 3}, random_values(9, 3));
  const Tensor soft = masked_softmax(logits, mask);
  const auto p = soft.values();
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      if (!mask[r * 3 + c]) CHECK(p[r * 3 + c] == 0.0);
      total += p[r * 3 + c];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(p[8] == 1.0);
}

TEST_CASE("masked softmax separates non-finite logits from empty rows") {
  const std::vector<unsigned char> mask{1, 1, 0, 1};
  CHECK_THROWS_AS(masked_softmax(Tensor({2, 2}, {0.0, INFINITY, 5.0, 1.0}), mask), NumericError);
  CHECK_THROWS_AS(masked_softmax(Tensor({2, 2}, {0.0, NAN, 5.0, 1.0}), mask), NumericError);
  CHECK(masked_softmax(Tensor({2, 2}, {0.0, 0.0, INFINITY, 1.0}), mask).at(3) == 1.0);
  const std::vector<unsigned char> empty_row{1, 1, 0, 0};
  CHECK_THROWS_AS(masked_softmax(Tensor({2, 2}, {0.0, 0.0, 0.0, 0.0}), empty_row), ContractViolation);
}

TEST_CASE("reverse mode matches finite differences for every op") {
  ParamSet params;
  const Tensor a = params.add("a", {2, 3}, random_values(6, 11));
  const Tensor b = params.add("b", {3, 4}, random_values(12, 12));
  const Tensor c = params.add("c", {2, 3, 4}, random_values(24, 13));
  const Tensor m = params.add("m", {2, 3}, random_values(6, 14));
  const Tensor pos = params.add("pos", {2, 3}, random_values(6, 15, 0.5, 2.0));
  const std::vector<unsigned char> mask{1, 1, 0, 0, 1, 1, 1, 0, 1};

  SUBCASE("arithmetic and broadcasting") {
    check_grads([&] { return sum(square(a * Tensor({3}, {1, -2, 3}) + a - reshape(m, {2, 3}) * 0.5)); }, params);
  }
  SUBCASE("nonlinearities") {
    check_grads([&] { return sum(tanh(a) + exp(a * 0.3) + leaky_relu(a, 0.2) + relu(m) + sqrt(pos)); }, params);
  }
  SUBCASE("smooth L1 on both sides of the knee") {
    check_grads([&] { return sum(smooth_l1(a * 2.0)); }, params);
  }
  SUBCASE("matmul, bmm and mix") {
    check_grads(
        [&] {
          const Tensor y = matmul(a, b);                                   // 2 x 4
          const Tensor z = bmm(reshape(a, {1, 2, 3}), reshape(b, {1, 3, 4}));
          const Tensor u = mix(c, m, 1);                                    // 2 x 2 x 4
          const Tensor w = mix(c, reshape(b, {4, 3}), 1);                    // 2 x 4 x 4
          return sum(square(y)) + mean(z) + sum(u * u) + mean(square(w));
        },
        params);
  }
  SUBCASE("mix along the last axis") {
    check_grads([&] { return sum(square(mix(c, reshape(b, {3, 4}), 2))); }, params);
  }
  SUBCASE("reductions and shape ops") {
    check_grads(
        [&] {
          const Tensor s = sum_last(c);                   // 2 x 3
          const Tensor k = mean_axis(c, 1);               // 2 x 4
          const Tensor e = expand(reshape(m, {2, 3, 1}), {2, 3, 4});
          const Tensor cat = concat({a, m}, 1);           // 2 x 6
          const Tensor sl = slice(c, 2, 1, 2);
          return sum(square(s)) + sum(k * k) + sum(e * c) + sum(square(cat)) + sum(sl);
        },
        params);
  }
  SUBCASE("softmax and cross-entropy") {
    check_grads(
        [&] {
          const Tensor logits = reshape(concat({a, m}, 1), {2, 6});
          const std::vector<std::size_t> targets{1, 5};
          const Tensor p = masked_softmax(reshape(concat({a, slice(m, 0, 0, 1)}, 0), {3, 3}), mask);
          return cross_entropy(logits, targets) + sum(square(p)) + sum(softmax_last(a) * m);
        },
        params);
  }
}

TEST_CASE("sqrt gradient is zero where the result is zero") {
  ParamSet params;
  const Tensor x = params.add("x", {2}, {0.0, 4.0});
  sum(sqrt(x)).backward();
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == doctest::Approx(0.25));
}

TEST_CASE("gradients accumulate until zero_grad") {
  ParamSet params;
  const Tensor x = params.add("x", {1}, {3.0});
  sum(square(x)).backward();
  sum(square(x)).backward();
  CHECK(x.grad()[0] == 12.0);
  params.zero_grad();
  CHECK((x.grad().empty() || x.grad()[0] == 0.0));
}

TEST_CASE("no-grad guard records no graph") {
  ParamSet params;
  const Tensor x = params.add("x", {1}, {3.0});
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    CHECK_FALSE(square(x).requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(square(x).requires_grad());
}

TEST_CASE("grad_check flags a wrong gradient") {
  ParamSet params;
  const Tensor x = params.add("x", {3}, {0.3, -0.7, 1.1});
  // Forward value is x^2 but the recorded derivative is 3x instead of 2x.
  const auto bad_square = [](const Tensor& t) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.at(i) * t.at(i);
    return make_result(t.shape(), out, {t}, [t](detail::Node& self) {
      auto& g = t.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * 3.0 * t.at(i);
    });
  };
  const auto report = grad_check([&] { return sum(bad_square(x)); }, params);
  CHECK(report.max_rel_error() == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK_THROWS_AS(grad_check([&] { return sum(x); }, params, {1e-9, 1e-8}), ContractViolation);
}

TEST_CASE("grad_check rejects a nondeterministic loss") {
  ParamSet params;
  const Tensor x = params.add("x", {1}, {1.0});
  int calls = 0;
  CHECK_THROWS_AS(grad_check([&] { return sum(x) * static_cast<double>(++calls); }, params), NumericError);
}

TEST_CASE("Adam first step moves by the learning rate") {
  ParamSet params;
  const Tensor p = params.add("p", {1}, {1.0});
  AdamState state(params, {0.1, 0.9, 0.999, 1e-8});
  sum(scale(p, 2.5)).backward();
  adam_step(params, state);
  CHECK(p.at(0) == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(state.step_count() == 1);
}

TEST_CASE("Adam matches a scalar reference over several steps") {
  ParamSet params;
  const Tensor p = params.add("p", {1}, {2.0});
  const AdamOptions opt{0.05, 0.9, 0.999, 1e-8};
  AdamState state(params, opt);
  double ref = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    params.zero_grad();
    sum(square(p)).backward();
    adam_step(params, state);
    const double g = 2.0 * ref;
    m = opt.beta1 * m + (1 - opt.beta1) * g;
    v = opt.beta2 * v + (1 - opt.beta2) * g * g;
    const double mh = m / (1 - std::pow(opt.beta1, t));
    const double vh = v / (1 - std::pow(opt.beta2, t));
    ref -= opt.learning_rate * mh / (std::sqrt(vh) + opt.epsilon);
    CHECK(p.at(0) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("Adam leaves parameters without gradient untouched") {
  ParamSet params;
  const Tensor used = params.add("used", {1}, {1.0});
  const Tensor idle = params.add("idle", {2}, {0.5, -0.5});
  AdamState state(params, {0.1});
  sum(used).backward();
  adam_step(params, state);
  CHECK(idle.at(0) == 0.5);
  CHECK(idle.at(1) == -0.5);
  CHECK(state.first_moments()[1][0] == 0.0);
}

TEST_CASE("Adam rejects non-finite gradients") {
  ParamSet params;
  const Tensor p = params.add("p", {1}, {0.0});
  AdamState state(params);
  sum(sqrt(add_scalar(p, -1.0))).backward();
  CHECK_THROWS_AS(adam_step(params, state), NumericError);
}

TEST_CASE("Adam rejects a step that overflows a parameter") {
  ParamSet params;
  const Tensor p = params.add("p", {1}, {1e308});
  AdamState state(params, {1e308});
  sum(scale(p, -1.0)).backward();
  CHECK_THROWS_AS(adam_step(params, state), NumericError);
}

TEST_CASE("rng streams are reproducible and split independently of position") {
  RngStream a(42), b(42);
  for (int i = 0; i < 5; ++i) CHECK(a() == b());
  const RngStream fresh(42);
  CHECK(a.split(7)() == fresh.split(7)());
  CHECK(fresh.split(7)() != fresh.split(8)());
  CHECK(RngStream(1)() != RngStream(2)());
  std::set<std::uint64_t> seen;
  for (std::uint64_t label = 0; label < 1000; ++label) seen.insert(fresh.split(label)());
  CHECK(seen.size() == 1000);
}

TEST_CASE("rng normal draws have unit moments") {
  RngStream rng(9);
  const std::size_t n = 200000;
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  std::vector<std::size_t> counts(5, 0);
  for (std::size_t i = 0; i < 50000; ++i) ++counts[rng.uniform_index(5)];
  for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - 10000.0) < 400.0);
}

TEST_CASE("checkpoint round trip and corruption") {
  ParamSet params;
  params.add("layer.w", {2, 2}, {0.5, -1.25, 3.0, 0.0});
  params.add("layer.b", {2}, {1.0, 2.0});
  const auto bytes = encode_checkpoint(params, "k = v\n");
  const auto ckpt = decode_checkpoint(bytes);
  CHECK(ckpt.metadata == "k = v\n");
  REQUIRE(ckpt.entries.size() == 2);
  CHECK(ckpt.entries[0].name == "layer.w");
  CHECK(ckpt.entries[0].shape == Shape{2, 2});
  CHECK(ckpt.entries[0].values[1] == -1.25f);

  ParamSet other;
  const Tensor w = other.add("layer.w", {2, 2}, std::vector<double>(4, 0.0));
  const Tensor bias = other.add("layer.b", {2}, std::vector<double>(2, 0.0));
  load_parameters(ckpt, other);
  CHECK(w.at(2) == 3.0);
  CHECK(bias.at(1) == 2.0);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), DataError);

  ParamSet mismatched;
  mismatched.add("layer.w", {4}, std::vector<double>(4, 0.0));
  mismatched.add("layer.b", {2}, std::vector<double>(2, 0.0));
  CHECK_THROWS_AS(load_parameters(ckpt, mismatched), DataError);
}

TEST_CASE("grad_check on a quadratic and a constant") {
  ParamSet params;
  const Tensor x = params.add("x", {3}, {0.4, -1.3, 2.2});
  CHECK(grad_check([&] { return sum(square(x)); }, params).max_rel_error() < 1e-8);
  params.zero_grad();
  const auto report = grad_check([&] { return add_scalar(sum(scale(x, 0.0)), 4.0); }, params);
  CHECK(report.entries[0].analytic == 0.0);
  CHECK(report.entries[0].numeric == 0.0);
  sum(scale(x, 0.0)).backward();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("Adam with zero gradients only advances the step counter") {
  ParamSet params;
  const Tensor p = params.add("p", {3}, {1.0, -2.0, 0.25});
  AdamState state(params, {0.1});
  for (int step = 1; step <= 3; ++step) {
    params.zero_grad();
    sum(scale(p, 0.0)).backward();
    adam_step(params, state);
    CHECK(state.step_count() == static_cast<std::size_t>(step));
  }
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == -2.0);
  CHECK(p.at(2) == 0.25);
  CHECK(AdamOptions{}.learning_rate == 1e-4);
}

TEST_CASE("sibling rng streams produce different sequences") {
  const RngStream root(5);
  RngStream a = root.split(0), b = root.split(1);
  std::size_t equal = 0;
  for (int i = 0; i < 1000; ++i) equal += a() == b() ? 1 : 0;
  CHECK(equal == 0);
  RngStream n = root.split(2);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) mean += n.normal();
  CHECK(std::abs(mean / 10000.0) < 0.05);
}
