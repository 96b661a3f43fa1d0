#include "gicisad/jigsaw/jigsaw.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

namespace gicisad::jigsaw {

namespace {

// Component labels of an undirected graph, numbered by lowest member.
std::vector<std::size_t> components(const std::vector<unsigned char>& adj, std::size_t n,
                                    std::size_t* count) {
  std::vector<std::size_t> label(n, n);
  std::size_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != n) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        if (adj[u * n + v] && label[v] == n) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  *count = next;
  return label;
}

Partition renumber(const std::vector<std::size_t>& raw) {
  Partition p;
  p.assignment.resize(raw.size());
  std::vector<std::size_t> map(raw.size() + 1, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (map[raw[i]] == static_cast<std::size_t>(-1)) map[raw[i]] = p.count++;
    p.assignment[i] = map[raw[i]];
  }
  return p;
}

}  // namespace

std::vector<std::vector<std::size_t>> Partition::members() const {
  std::vector<std::vector<std::size_t>> out(count);
  for (std::size_t node = 0; node < assignment.size(); ++node) out[assignment[node]].push_back(node);
  return out;
}

std::vector<unsigned char> symmetrize(const graph::Adjacency& a) {
  const std::size_t n = a.nodes;
  std::vector<unsigned char> s(n * n, 0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t m = 0; m < n; ++m)
      if (k != m && (a.edge(k, m) || a.edge(m, k))) s[k * n + m] = 1;
  return s;
}

std::vector<double> edge_betweenness(const std::vector<unsigned char>& adj, std::size_t n) {
  std::vector<double> eb(n * n, 0.0);
  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  std::vector<std::vector<std::size_t>> preds(n);
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    for (auto& p : preds) p.clear();
    order.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      order.push_back(u);
      for (std::size_t v = 0; v < n; ++v) {
        if (!adj[u * n + v]) continue;
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
        if (dist[v] == dist[u] + 1) {
          sigma[v] += sigma[u];
          preds[v].push_back(u);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t u : preds[w]) {
        const double c = sigma[u] / sigma[w] * (1.0 + delta[w]);
        eb[u * n + w] += c;
        eb[w * n + u] += c;
        delta[u] += c;
      }
    }
  }
  // Every unordered source/target pair was visited from both ends.
  for (double& x : eb) x *= 0.5;
  return eb;
}

Partition extract_subgraphs(const graph::Adjacency& a, std::size_t count) {
  const std::size_t n = a.nodes;
  if (count < 2 || count > n) {
    throw ConfigError("subgraph count " + std::to_string(count) + " must lie in [2, " +
                      std::to_string(n) + "]");
  }
  auto adj = symmetrize(a);
  std::size_t found = 0;
  auto label = components(adj, n, &found);

  while (found < count) {
    const auto eb = edge_betweenness(adj, n);
    double best = -1.0;
    std::size_t bk = 0, bn = 0;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t m = k + 1; m < n; ++m) {
        if (!adj[k * n + m]) continue;
        // Betweenness sums fractions; treat near-equal values as ties.
        if (eb[k * n + m] > best + 1e-9 * std::max(1.0, best)) {
          best = eb[k * n + m];
          bk = k;
          bn = m;
        }
      }
    }
    adj[bk * n + bn] = adj[bn * n + bk] = 0;
    label = components(adj, n, &found);
  }

  if (found > count) {
    // Merge the two smallest components until `count` remain.
    std::vector<std::vector<std::size_t>> groups(found);
    for (std::size_t i = 0; i < n; ++i) groups[label[i]].push_back(i);
    while (groups.size() > count) {
      std::sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) {
        return x.size() != y.size() ? x.size() < y.size() : x.front() < y.front();
      });
      auto merged = groups[0];
      merged.insert(merged.end(), groups[1].begin(), groups[1].end());
      std::sort(merged.begin(), merged.end());
      groups.erase(groups.begin(), groups.begin() + 2);
      groups.push_back(std::move(merged));
    }
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (std::size_t node : groups[g]) label[node] = g;
  }
  return renumber(label);
}

std::size_t node_density(const Partition& partition, const graph::Adjacency& a, std::size_t node) {
  if (node >= partition.assignment.size() || partition.assignment.size() != a.nodes) {
    throw ContractViolation("node_density: node outside the partition");
  }
  std::size_t density = 0;
  for (std::size_t m = 0; m < a.nodes; ++m) {
    if (m != node && partition.assignment[m] == partition.assignment[node] &&
        (a.edge(node, m) || a.edge(m, node))) {
      ++density;
    }
  }
  return density;
}

PuzzleKind parse_puzzle_kind(const std::string& name) {
  if (name == "inter") return PuzzleKind::kInter;
  if (name == "intra") return PuzzleKind::kIntra;
  throw ConfigError("unknown puzzle kind '" + name + "'");
}

std::string to_string(PuzzleKind kind) { return kind == PuzzleKind::kInter ? "inter" : "intra"; }

std::size_t class_count(PuzzleKind kind, std::size_t subgraphs) {
  if (subgraphs < 2) throw ConfigError("puzzles need at least two subgraphs");
  return kind == PuzzleKind::kInter ? subgraphs * (subgraphs - 1) / 2 : subgraphs;
}

std::size_t pair_class_id(std::size_t i, std::size_t j, std::size_t subgraphs) {
  if (!(i < j && j < subgraphs)) throw ContractViolation("pair_class_id needs i < j < count");
  // Pairs (0,1) .. (0,n-1), (1,2) .. precede row i.
  return i * subgraphs - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<std::size_t, std::size_t> pair_from_class_id(std::size_t class_id, std::size_t subgraphs) {
  for (std::size_t i = 0; i + 1 < subgraphs; ++i) {
    const std::size_t row = subgraphs - i - 1;
    if (class_id < row) return {i, i + 1 + class_id};
    class_id -= row;
  }
  throw ContractViolation("class id out of range");
}

graph::Adjacency apply_permutation(const graph::Adjacency& a, const std::vector<std::size_t>& perm) {
  const std::size_t n = a.nodes;
  if (perm.size() != n) throw ContractViolation("permutation size mismatch");
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) throw ContractViolation("not a bijection");
    seen[p] = true;
  }
  graph::Adjacency out = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.matrix[perm[i] * n + perm[j]] = a.matrix[i * n + j];
      if (!a.similarity.empty()) out.similarity[perm[i] * n + perm[j]] = a.similarity[i * n + j];
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> permutation_cycles(const std::vector<std::size_t>& perm) {
  std::vector<std::vector<std::size_t>> cycles;
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t s = 0; s < perm.size(); ++s) {
    if (seen[s] || perm[s] == s) continue;
    std::vector<std::size_t> cycle;
    for (std::size_t p = s; !seen[p]; p = perm[p]) {
      seen[p] = true;
      cycle.push_back(p);
    }
    cycles.push_back(std::move(cycle));
  }
  return cycles;
}

ShuffleResult shuffle_inter(const graph::Adjacency& a, const Partition& partition, RngStream& rng) {
  const std::size_t eta = partition.count;
  const std::size_t classes = class_count(PuzzleKind::kInter, eta);
  const std::size_t class_id = rng.uniform_index(classes);
  const auto [gi, gj] = pair_from_class_id(class_id, eta);
  const auto groups = partition.members();

  auto ranked = [&](std::size_t g) {
    std::vector<std::pair<std::size_t, std::size_t>> items;  // (density, node)
    for (std::size_t node : groups[g]) items.push_back({node_density(partition, a, node), node});
    std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    std::vector<std::size_t> out;
    for (const auto& it : items) out.push_back(it.second);
    return out;
  };

  PuzzleMove move;
  move.kind = PuzzleKind::kInter;
  move.first = gi;
  move.second = gj;
  move.class_id = class_id;
  move.class_total = classes;
  move.first_ranked = ranked(gi);
  move.second_ranked = ranked(gj);
  move.permutation.resize(a.nodes);
  std::iota(move.permutation.begin(), move.permutation.end(), std::size_t{0});
  const std::size_t pairs = std::min(move.first_ranked.size(), move.second_ranked.size());
  for (std::size_t r = 0; r < pairs; ++r) {
    const std::size_t x = move.first_ranked[r], y = move.second_ranked[r];
    move.permutation[x] = y;
    move.permutation[y] = x;
  }
  return {apply_permutation(a, move.permutation), std::move(move)};
}

ShuffleResult shuffle_intra(const graph::Adjacency& a, const Partition& partition, RngStream& rng) {
  const auto groups = partition.members();
  if (std::none_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() >= 2; })) {
    throw DegeneratePartitionError("intra-community shuffle needs a subgraph with two or more nodes");
  }
  std::size_t g = 0;
  do {
    g = rng.uniform_index(partition.count);
  } while (groups[g].size() < 2);

  const auto& members = groups[g];
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool identity = true;
  while (identity) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
    identity = std::is_sorted(order.begin(), order.end());
  }

  PuzzleMove move;
  move.kind = PuzzleKind::kIntra;
  move.first = move.second = g;
  move.class_id = g;
  move.class_total = class_count(PuzzleKind::kIntra, partition.count);
  move.permutation.resize(a.nodes);
  std::iota(move.permutation.begin(), move.permutation.end(), std::size_t{0});
  for (std::size_t i = 0; i < members.size(); ++i) move.permutation[members[i]] = members[order[i]];
  return {apply_permutation(a, move.permutation), std::move(move)};
}

ShuffleResult shuffle(PuzzleKind kind, const graph::Adjacency& a, const Partition& partition, RngStream& rng) {
  return kind == PuzzleKind::kInter ? shuffle_inter(a, partition, rng) : shuffle_intra(a, partition, rng);
}

std::string describe(const Partition& partition, const PuzzleMove& move) {
  std::ostringstream out;
  out << "subgraphs " << partition.count << "\n";
  for (std::size_t node = 0; node < partition.assignment.size(); ++node) {
    out << "node " << node << " -> subgraph " << partition.assignment[node] << "\n";
  }
  out << "move " << to_string(move.kind) << " subgraphs " << move.first;
  if (move.kind == PuzzleKind::kInter) out << "," << move.second;
  out << " class " << move.class_id << "/" << move.class_total << "\n";
  out << "cycles";
  const auto cycles = permutation_cycles(move.permutation);
  if (cycles.empty()) out << " (identity)";
  for (const auto& c : cycles) {
    out << " (";
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? " " : "") << c[i];
    out << ")";
  }
  out << "\n";
  return out.str();
}

}  // namespace gicisad::jigsaw
