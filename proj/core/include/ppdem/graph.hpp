#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ppdem {

// Undirected network topology. Node labels are 1-based and survive node
// removal unchanged, so a label set need not be contiguous.
class Graph {
 public:
  Graph() = default;
  // Nodes 1..node_count.
  Graph(int node_count, std::vector<std::pair<int, int>> edges);
  // Explicit label set (used by induced subgraphs).
  Graph(std::vector<int> nodes, std::vector<std::pair<int, int>> edges);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<int>& nodes() const { return nodes_; }
  // Normalized (lo, hi) pairs, sorted; the position is the edge index.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  bool has_node(int i) const;
  bool has_edge(int i, int j) const;
  int edge_index(int i, int j) const;  // -1 if absent
  const std::vector<int>& neighbors(int i) const;  // ascending labels
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  int node_position(int label) const;  // position in nodes(), -1 if absent

  // Edge-list text format: header "n m", then one "i j" line per edge.
  // Requires contiguous labels 1..n.
  std::string to_edge_list() const;
  static Graph from_edge_list(const std::string& text);

 private:
  std::vector<int> nodes_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;  // indexed by label
  std::vector<int> positions_;               // label -> position in nodes_
  void build_index();
};

// Per-directed-edge sign entries; antisymmetric by construction.
struct EdgeSigns {
  struct Entry {
    int i = 0;
    int j = 0;
    double sign = 0.0;  // entry for direction i|j
  };
  std::vector<Entry> entries;  // 2m entries
};

// Directed-edge sign: +1 if i > j, -1 if i < j.
inline double edge_sign(int i, int j) { return i > j ? 1.0 : -1.0; }

EdgeSigns edge_signs(const Graph& g);

// Nodes placed i.i.d. uniformly in the unit square; an edge joins every pair
// within the given radius. Deterministic for a fixed seed. May be
// disconnected; callers check. Coordinates are exposed for auditing.
Graph random_geometric_graph(int n, double radius, std::uint64_t seed,
                             std::vector<std::pair<double, double>>* coordinates = nullptr);

bool is_connected(const Graph& g);

// Induced subgraph on the remaining nodes; labels are kept as-is.
Graph remove_nodes(const Graph& g, const std::set<int>& removed);

// Deterministic exact search: start at the lowest label, try neighbors in
// ascending order, return the first cycle visiting every node exactly once.
// Exponential worst case; intended for desk-scale graphs.
std::optional<std::vector<int>> find_hamiltonian_cycle(const Graph& g);

// Fixed 5-node demo topology with a Hamiltonian cycle 1-2-3-4-5-1; used by
// the privacy walkthroughs and tests.
Graph demo_graph();

}  // namespace ppdem
