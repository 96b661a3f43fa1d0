#include "gicisad/graph/adjacency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gicisad/errors.hpp"

namespace gicisad::graph {

std::vector<std::size_t> Adjacency::neighbors(std::size_t k) const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < nodes; ++n)
    if (edge(k, n)) out.push_back(n);
  return out;
}

std::size_t Adjacency::row_sum(std::size_t k) const {
  std::size_t s = 0;
  for (std::size_t n = 0; n < nodes; ++n) s += edge(k, n);
  return s;
}

std::vector<unsigned char> Adjacency::with_self_loops() const {
  auto m = matrix;
  for (std::size_t k = 0; k < nodes; ++k) m[k * nodes + k] = 1;
  return m;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ContractViolation("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Adjacency build_adjacency(const EmbeddingView& v, std::size_t degree) {
  const std::size_t k_nodes = v.nodes;
  if (v.values.size() != k_nodes * v.dim) throw ContractViolation("embedding view size mismatch");
  if (degree < 1 || degree + 1 > k_nodes) {
    throw ConfigError("graph degree " + std::to_string(degree) + " must lie in [1, " +
                      std::to_string(k_nodes == 0 ? 0 : k_nodes - 1) + "]");
  }
  Adjacency a;
  a.nodes = k_nodes;
  a.degree = degree;
  a.matrix.assign(k_nodes * k_nodes, 0);
  a.similarity.assign(k_nodes * k_nodes, 0.0);
  for (std::size_t k = 0; k < k_nodes; ++k) {
    for (std::size_t n = 0; n < k_nodes; ++n) {
      if (n != k) a.similarity[k * k_nodes + n] = cosine_similarity(v.row(k), v.row(n));
    }
  }
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < k_nodes; ++k) {
    candidates.clear();
    for (std::size_t n = 0; n < k_nodes; ++n)
      if (n != k) candidates.push_back(n);
    const double* sim = a.similarity.data() + k * k_nodes;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [sim](std::size_t x, std::size_t y) { return sim[x] > sim[y]; });
    for (std::size_t i = 0; i < degree; ++i) a.matrix[k * k_nodes + candidates[i]] = 1;
  }
  return a;
}

std::vector<double> init_embeddings(std::size_t nodes, std::size_t dim, RngStream& rng) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> v(nodes * dim);
  for (std::size_t k = 0; k < nodes; ++k) {
    bool zero = true;
    while (zero) {
      for (std::size_t d = 0; d < dim; ++d) {
        v[k * dim + d] = rng.normal() * std_dev;
        zero = zero && v[k * dim + d] == 0.0;
      }
    }
  }
  return v;
}

}  // namespace gicisad::graph
