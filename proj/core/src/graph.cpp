#include "ppdem/graph.hpp"

#include <algorithm>
#include <charconv>
#include <queue>
#include <random>
#include <sstream>

#include "ppdem/errors.hpp"
#include "ppdem/rng.hpp"

namespace ppdem {

namespace {

std::vector<std::pair<int, int>> normalize_edges(std::vector<std::pair<int, int>> edges) {
  for (auto& e : edges) {
    if (e.first == e.second) {
      throw InvalidArgument("self-loop on node " + std::to_string(e.first));
    }
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw InvalidArgument("duplicate edge in edge list");
  }
  return edges;
}

}  // namespace

Graph::Graph(int node_count, std::vector<std::pair<int, int>> edges) {
  if (node_count < 1) throw InvalidArgument("graph needs at least one node");
  nodes_.resize(node_count);
  for (int i = 0; i < node_count; ++i) nodes_[i] = i + 1;
  edges_ = normalize_edges(std::move(edges));
  build_index();
}

Graph::Graph(std::vector<int> nodes, std::vector<std::pair<int, int>> edges)
    : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidArgument("graph needs at least one node");
  std::sort(nodes_.begin(), nodes_.end());
  if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end()) {
    throw InvalidArgument("duplicate node label");
  }
  if (nodes_.front() < 1) throw InvalidArgument("node labels are 1-based");
  edges_ = normalize_edges(std::move(edges));
  build_index();
}

void Graph::build_index() {
  const int max_label = nodes_.empty() ? 0 : nodes_.back();
  adjacency_.assign(max_label + 1, {});
  positions_.assign(max_label + 1, -1);
  for (std::size_t p = 0; p < nodes_.size(); ++p) positions_[nodes_[p]] = static_cast<int>(p);
  for (const auto& [a, b] : edges_) {
    if (a > max_label || b > max_label || positions_[a] < 0 || positions_[b] < 0) {
      throw InvalidArgument("edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") references a missing node");
    }
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

bool Graph::has_node(int i) const {
  return i >= 1 && i < static_cast<int>(positions_.size()) && positions_[i] >= 0;
}

bool Graph::has_edge(int i, int j) const { return edge_index(i, j) >= 0; }

int Graph::edge_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), std::make_pair(i, j));
  if (it == edges_.end() || *it != std::make_pair(i, j)) return -1;
  return static_cast<int>(it - edges_.begin());
}

const std::vector<int>& Graph::neighbors(int i) const {
  if (!has_node(i)) throw InvalidArgument("unknown node " + std::to_string(i));
  return adjacency_[i];
}

int Graph::node_position(int label) const {
  if (label < 1 || label >= static_cast<int>(positions_.size())) return -1;
  return positions_[label];
}

std::string Graph::to_edge_list() const {
  for (std::size_t p = 0; p < nodes_.size(); ++p) {
    if (nodes_[p] != static_cast<int>(p) + 1) {
      throw InvalidArgument("edge-list format requires contiguous labels 1..n");
    }
  }
  std::ostringstream out;
  out << node_count() << ' ' << edge_count() << '\n';
  for (const auto& [a, b] : edges_) out << a << ' ' << b << '\n';
  return out.str();
}

Graph Graph::from_edge_list(const std::string& text) {
  std::istringstream in(text);
  long n = 0, m = 0;
  if (!(in >> n >> m)) throw ParseError("missing 'n m' header", 1, 1);
  if (n < 1 || m < 0) throw ParseError("invalid 'n m' header", 1, 1);
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long l = 0; l < m; ++l) {
    int a = 0, b = 0;
    if (!(in >> a >> b)) throw ParseError("missing edge line", l + 2, 1);
    if (a < 1 || a > n || b < 1 || b > n) throw ParseError("edge endpoint out of range", l + 2, 1);
    edges.emplace_back(a, b);
  }
  return Graph(static_cast<int>(n), std::move(edges));
}

EdgeSigns edge_signs(const Graph& g) {
  EdgeSigns signs;
  signs.entries.reserve(2 * g.edge_count());
  for (const auto& [a, b] : g.edges()) {
    signs.entries.push_back({a, b, edge_sign(a, b)});
  }
  for (const auto& [a, b] : g.edges()) {
    signs.entries.push_back({b, a, edge_sign(b, a)});
  }
  return signs;
}

Graph random_geometric_graph(int n, double radius, std::uint64_t seed,
                             std::vector<std::pair<double, double>>* coordinates) {
  if (n < 2) throw InvalidArgument("geometric graph needs n >= 2");
  if (!(radius > 0)) throw InvalidArgument("geometric graph needs radius > 0");
  std::mt19937_64 rng(SeedStreams(seed).derive("geometric-placement"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> pts(n);
  for (auto& p : pts) {
    p.first = unit(rng);
    p.second = unit(rng);
  }
  std::vector<std::pair<int, int>> edges;
  const double r2 = radius * radius;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = pts[i].first - pts[j].first;
      const double dy = pts[i].second - pts[j].second;
      if (dx * dx + dy * dy <= r2) edges.emplace_back(i + 1, j + 1);
    }
  }
  if (coordinates) *coordinates = std::move(pts);
  return Graph(n, std::move(edges));
}

bool is_connected(const Graph& g) {
  if (g.node_count() == 0) return false;
  std::vector<char> seen(g.nodes().back() + 1, 0);
  std::queue<int> frontier;
  frontier.push(g.nodes().front());
  seen[g.nodes().front()] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == g.node_count();
}

Graph remove_nodes(const Graph& g, const std::set<int>& removed) {
  for (int r : removed) {
    if (!g.has_node(r)) throw InvalidArgument("cannot remove unknown node " + std::to_string(r));
  }
  std::vector<int> kept;
  for (int v : g.nodes()) {
    if (!removed.count(v)) kept.push_back(v);
  }
  if (kept.empty()) throw InvalidArgument("cannot remove every node");
  std::vector<std::pair<int, int>> edges;
  for (const auto& [a, b] : g.edges()) {
    if (!removed.count(a) && !removed.count(b)) edges.emplace_back(a, b);
  }
  return Graph(std::move(kept), std::move(edges));
}

namespace {

bool extend_cycle(const Graph& g, std::vector<int>& path, std::vector<char>& used) {
  if (path.size() == static_cast<std::size_t>(g.node_count())) {
    return g.has_edge(path.back(), path.front());
  }
  for (int next : g.neighbors(path.back())) {
    if (used[next]) continue;
    used[next] = 1;
    path.push_back(next);
    if (extend_cycle(g, path, used)) return true;
    path.pop_back();
    used[next] = 0;
  }
  return false;
}

}  // namespace

std::optional<std::vector<int>> find_hamiltonian_cycle(const Graph& g) {
  if (g.node_count() < 3) throw InvalidArgument("Hamiltonian cycle needs n >= 3");
  std::vector<int> path{g.nodes().front()};
  std::vector<char> used(g.nodes().back() + 1, 0);
  used[path.front()] = 1;
  if (extend_cycle(g, path, used)) return path;
  return std::nullopt;
}

Graph demo_graph() {
  return Graph(5, {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {1, 5}, {4, 5}});
}

}  // namespace ppdem
