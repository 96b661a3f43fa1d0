#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gicisad/errors.hpp"
#include "gicisad/graph/adjacency.hpp"
#include "gicisad/numerics/rng.hpp"
#include "oracles.hpp"

using namespace gicisad;
using namespace gicisad::graph;

namespace {

std::vector<double> row(const std::vector<double>& v, std::size_t k, std::size_t d) {
  return {v.begin() + static_cast<std::ptrdiff_t>(k * d), v.begin() + static_cast<std::ptrdiff_t>((k + 1) * d)};
}

// Top-degree neighbours by sorting (similarity desc, index asc).
std::vector<std::size_t> reference_neighbors(const std::vector<double>& v, std::size_t k_nodes, std::size_t d,
                                             std::size_t k, std::size_t degree) {
  std::vector<std::size_t> cand;
  for (std::size_t n = 0; n < k_nodes; ++n)
    if (n != k) cand.push_back(n);
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
    return oracle::cosine(row(v, k, d), row(v, a, d)) > oracle::cosine(row(v, k, d), row(v, b, d));
  });
  cand.resize(degree);
  std::sort(cand.begin(), cand.end());
  return cand;
}

}  // namespace

TEST_CASE("cosine similarity values") {
  const std::vector<double> x{1, 0}, diag{1, 1}, y{0, 2}, neg{-3, 0};
  CHECK(cosine_similarity(x, diag) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(cosine_similarity(x, y) == 0.0);
  CHECK(cosine_similarity(x, neg) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(diag, diag) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_similarity(x, std::vector<double>{0, 0}), ContractViolation);
  CHECK_THROWS_AS(cosine_similarity(x, std::vector<double>{1, 2, 3}), ContractViolation);
}

TEST_CASE("three-node adjacency by hand") {
  // v0 = (1, 0), v1 = (1, 1), v2 = (0, 1): v0 and v2 are orthogonal and
  // both sit at 45 degrees from v1.
  const std::vector<double> v{1, 0, 1, 1, 0, 1};
  const auto a = build_adjacency({v, 3, 2}, 1);
  CHECK(a.neighbors(0) == std::vector<std::size_t>{1});
  CHECK(a.neighbors(1) == std::vector<std::size_t>{0});  // tie resolved to the lower index
  CHECK(a.neighbors(2) == std::vector<std::size_t>{1});
  CHECK(a.similarity[0 * 3 + 2] == doctest::Approx(0.0));
  CHECK(a.similarity[1 * 3 + 2] == doctest::Approx(1.0 / std::sqrt(2.0)));
  const auto loops = a.with_self_loops();
  CHECK(loops == std::vector<unsigned char>{1, 1, 0, 1, 1, 0, 0, 1, 1});
}

TEST_CASE("full degree gives the complete graph without self loops") {
  RngStream rng(3);
  const auto v = init_embeddings(6, 4, rng);
  const auto a = build_adjacency({v, 6, 4}, 5);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t n = 0; n < 6; ++n) CHECK(a.edge(k, n) == (k != n));
  CHECK_THROWS_AS(build_adjacency({v, 6, 4}, 6), ConfigError);
  CHECK_THROWS_AS(build_adjacency({v, 6, 4}, 0), ConfigError);
}

TEST_CASE("top-degree selection matches a sorting reference on random embeddings") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RngStream rng(seed);
    const std::size_t k_nodes = 5 + seed % 13, d = 2 + seed % 7, degree = 1 + seed % (k_nodes - 1);
    const auto v = init_embeddings(k_nodes, d, rng);
    const auto a = build_adjacency({v, k_nodes, d}, degree);
    for (std::size_t k = 0; k < k_nodes; ++k) {
      CHECK(a.row_sum(k) == degree);
      CHECK_FALSE(a.edge(k, k));
      CHECK(a.neighbors(k) == reference_neighbors(v, k_nodes, d, k, degree));
    }
  }
}

TEST_CASE("adjacency is invariant to positive rescaling of embeddings") {
  RngStream rng(17);
  const auto v = init_embeddings(17, 16, rng);
  auto scaled = v;
  RngStream scale_rng(18);
  for (std::size_t k = 0; k < 17; ++k) {
    const double c = 0.01 + 100.0 * scale_rng.uniform();
    for (std::size_t i = 0; i < 16; ++i) scaled[k * 16 + i] *= c;
  }
  CHECK(build_adjacency({v, 17, 16}, 5).matrix == build_adjacency({scaled, 17, 16}, 5).matrix);
}

TEST_CASE("embedding init has the documented spread") {
  RngStream rng(5);
  const std::size_t k_nodes = 400, d = 16;
  const auto v = init_embeddings(k_nodes, d, rng);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::sqrt(var) == doctest::Approx(1.0 / std::sqrt(16.0)).epsilon(0.05));
  RngStream again(5);
  CHECK(init_embeddings(k_nodes, d, again) == v);
}

TEST_CASE("three-node adjacency with an opposite vector") {
  const std::vector<double> v{1, 0, 0.9, 0.1, -1, 0};
  const auto a = build_adjacency({v, 3, 2}, 1);
  CHECK(a.neighbors(0) == std::vector<std::size_t>{1});
  CHECK(a.neighbors(1) == std::vector<std::size_t>{0});
  CHECK(a.neighbors(2) == std::vector<std::size_t>{1});
  CHECK(a.similarity[2 * 3 + 1] == doctest::Approx(-0.9 / std::sqrt(0.82)));
  CHECK(a.similarity[2 * 3 + 0] == doctest::Approx(-1.0));
}

TEST_CASE("cosine of identical and orthogonal vectors") {
  const std::vector<double> a{0.3, -2, 5, 1}, e1{1, 0, 0, 0}, e2{0, 1, 0, 0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(e1, e2) == 0.0);
  const std::vector<double> x{1, 0}, d{1, 1};
  CHECK(cosine_similarity(x, d) == doctest::Approx(0.70710678).epsilon(1e-8));
}

TEST_CASE("four nodes with degree three are fully connected") {
  RngStream rng(8);
  const auto v = init_embeddings(4, 3, rng);
  const auto a = build_adjacency({v, 4, 3}, 3);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t n = 0; n < 4; ++n) CHECK(a.edge(k, n) == (k != n));
}
