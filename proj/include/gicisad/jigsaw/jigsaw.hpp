#pragma once

#include <string>
#include <vector>

#include "gicisad/errors.hpp"
#include "gicisad/graph/adjacency.hpp"
#include "gicisad/numerics/rng.hpp"

namespace gicisad::jigsaw {

/// Node -> subgraph id, ids contiguous from 0 and numbered in order of each
/// subgraph's lowest node.
struct Partition {
  std::vector<std::size_t> assignment;
  std::size_t count = 0;

  std::vector<std::vector<std::size_t>> members() const;
};

/// Undirected view: edge (k, n) present when A_kn or A_nk.
std::vector<unsigned char> symmetrize(const graph::Adjacency& a);

/// Edge betweenness of an undirected graph (Brandes), K x K symmetric with
/// each unordered pair counted once per shortest path.
std::vector<double> edge_betweenness(const std::vector<unsigned char>& undirected, std::size_t nodes);

/// Girvan-Newman on the symmetrized graph: repeatedly drop the edge with
/// the highest betweenness (ties: lexicographically smallest (k, n), k < n)
/// until exactly `count` connected components remain. When the graph starts
/// with more components, the two smallest (ties: lowest node) are merged
/// until `count` remain.
Partition extract_subgraphs(const graph::Adjacency& a, std::size_t count);

/// Symmetrized edges from `node` to other members of its own subgraph.
std::size_t node_density(const Partition& partition, const graph::Adjacency& a, std::size_t node);

enum class PuzzleKind { kInter, kIntra };

PuzzleKind parse_puzzle_kind(const std::string& name);
std::string to_string(PuzzleKind kind);

/// inter: C(count, 2); intra: count.
std::size_t class_count(PuzzleKind kind, std::size_t subgraphs);
/// Lexicographic index of the pair (i, j), i < j, among C(count, 2) pairs.
std::size_t pair_class_id(std::size_t i, std::size_t j, std::size_t subgraphs);
std::pair<std::size_t, std::size_t> pair_from_class_id(std::size_t class_id, std::size_t subgraphs);

struct PuzzleMove {
  PuzzleKind kind = PuzzleKind::kInter;
  std::size_t first = 0;   // subgraph i (the only one for intra)
  std::size_t second = 0;  // subgraph j, inter only
  /// Node p moves to position permutation[p].
  std::vector<std::size_t> permutation;
  std::size_t class_id = 0;
  std::size_t class_total = 0;
  /// Inter only: members of each chosen subgraph by descending density;
  /// entries at equal rank were swapped.
  std::vector<std::size_t> first_ranked;
  std::vector<std::size_t> second_ranked;
};

struct ShuffleResult {
  graph::Adjacency permuted;
  PuzzleMove move;
};

/// A'_{pi(i) pi(j)} = A_ij, i.e. P A P^T with P_{pi(i), i} = 1. The
/// similarity cache is permuted the same way.
graph::Adjacency apply_permutation(const graph::Adjacency& a, const std::vector<std::size_t>& permutation);
std::vector<std::vector<std::size_t>> permutation_cycles(const std::vector<std::size_t>& permutation);

/// Picks a pair of subgraphs uniformly and swaps their nodes rank by rank
/// in order of density; surplus nodes of the larger subgraph stay put.
ShuffleResult shuffle_inter(const graph::Adjacency& a, const Partition& partition, RngStream& rng);

class DegeneratePartitionError : public DataError {
 public:
  using DataError::DataError;
};

/// Picks a subgraph with at least two nodes uniformly and applies a uniform
/// non-identity permutation to its members. Throws DegeneratePartitionError
/// when every subgraph is a singleton.
ShuffleResult shuffle_intra(const graph::Adjacency& a, const Partition& partition, RngStream& rng);

ShuffleResult shuffle(PuzzleKind kind, const graph::Adjacency& a, const Partition& partition, RngStream& rng);

/// Text dump: node -> subgraph, permutation cycles and class id.
std::string describe(const Partition& partition, const PuzzleMove& move);

}  // namespace gicisad::jigsaw
