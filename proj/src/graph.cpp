#include "pgg/graph.hpp"

#include <algorithm>
#include <string>

#include "pgg/errors.hpp"

namespace pgg {

Graph::Graph(int num_vertices) : num_vertices_(num_vertices) {
  if (num_vertices < 0) throw InputError("graph: negative vertex count");
  build();
}

Graph::Graph(int num_vertices, std::span<const Edge> edges)
    : num_vertices_(num_vertices), edges_(edges.begin(), edges.end()) {
  if (num_vertices < 0) throw InputError("graph: negative vertex count");
  build();
}

Graph::Graph(int num_vertices, std::span<const std::pair<int, int>> edges)
    : num_vertices_(num_vertices) {
  if (num_vertices < 0) throw InputError("graph: negative vertex count");
  edges_.reserve(edges.size());
  for (auto [u, v] : edges) edges_.push_back({u, v});
  build();
}

void Graph::build() {
  for (Edge& e : edges_) {
    if (e.first < 0 || e.second < 0 || e.first >= num_vertices_ ||
        e.second >= num_vertices_) {
      throw InputError("graph: edge (" + std::to_string(e.first) + "," +
                       std::to_string(e.second) + ") out of range for n=" +
                       std::to_string(num_vertices_));
    }
    if (e.first == e.second) {
      throw InputError("graph: self-loop at vertex " + std::to_string(e.first));
    }
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges_.begin(), edges_.end());
  auto dup = std::adjacent_find(edges_.begin(), edges_.end());
  if (dup != edges_.end()) {
    throw InputError("graph: duplicate edge (" + std::to_string(dup->first) + "," +
                     std::to_string(dup->second) + ")");
  }

  offsets_.assign(num_vertices_ + 1, 0);
  for (const Edge& e : edges_) {
    ++offsets_[e.first + 1];
    ++offsets_[e.second + 1];
  }
  for (int v = 0; v < num_vertices_; ++v) offsets_[v + 1] += offsets_[v];
  targets_.assign(offsets_.back(), 0);
  std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) {
    targets_[cursor[e.first]++] = e.second;
    targets_[cursor[e.second]++] = e.first;
  }
  for (int v = 0; v < num_vertices_; ++v) {
    std::sort(targets_.begin() + offsets_[v], targets_.begin() + offsets_[v + 1]);
  }
}

bool Graph::has_edge(int u, int v) const {
  if (u < 0 || v < 0 || u >= num_vertices_ || v >= num_vertices_) return false;
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

int Graph::max_degree() const {
  int best = 0;
  for (int v = 0; v < num_vertices_; ++v) best = std::max(best, degree(v));
  return best;
}

Graph Graph::relabeled(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != num_vertices_) {
    throw InputError("graph: permutation length mismatch");
  }
  std::vector<Edge> mapped;
  mapped.reserve(edges_.size());
  for (const Edge& e : edges_) mapped.push_back({perm[e.first], perm[e.second]});
  return Graph(num_vertices_, mapped);
}

}  // namespace pgg
