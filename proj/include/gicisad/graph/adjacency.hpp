#pragma once

#include <span>
#include <vector>

#include "gicisad/numerics/rng.hpp"

namespace gicisad::graph {

/// Row-major view of the K x D joint embedding matrix.
struct EmbeddingView {
  std::span<const double> values;
  std::size_t nodes = 0;
  std::size_t dim = 0;

  std::span<const double> row(std::size_t k) const { return values.subspan(k * dim, dim); }
};

/// Directed binary graph over K nodes. Row k lists the nodes k points to.
struct Adjacency {
  std::size_t nodes = 0;
  std::size_t degree = 0;
  std::vector<unsigned char> matrix;  // K x K
  std::vector<double> similarity;     // K x K, diagonal unused

  bool edge(std::size_t from, std::size_t to) const { return matrix[from * nodes + to] != 0; }
  std::vector<std::size_t> neighbors(std::size_t k) const;
  std::size_t row_sum(std::size_t k) const;
  /// matrix with the diagonal set, as used by the attention softmax.
  std::vector<unsigned char> with_self_loops() const;
};

/// Cosine of the angle between two nonzero vectors.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Connects each node to the `degree` other nodes of highest cosine
/// similarity; ties go to the lower node index.
Adjacency build_adjacency(const EmbeddingView& embeddings, std::size_t degree);

/// Zero-mean Gaussian embeddings with std 1/sqrt(dim); a row that comes out
/// exactly zero is redrawn.
std::vector<double> init_embeddings(std::size_t nodes, std::size_t dim, RngStream& rng);

}  // namespace gicisad::graph
