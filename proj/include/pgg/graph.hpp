#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace pgg {

/// Undirected edge stored with first < second.
struct Edge {
  int first = 0;
  int second = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Simple undirected graph on vertices 0..n-1 with CSR adjacency.
///
/// Immutable once built. Construction normalizes every edge to first < second,
/// sorts the edge list, and rejects self-loops, duplicates and out-of-range
/// endpoints with InputError.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int num_vertices);
  Graph(int num_vertices, std::span<const Edge> edges);
  Graph(int num_vertices, std::span<const std::pair<int, int>> edges);

  int num_vertices() const { return num_vertices_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Sorted neighbor list of v.
  std::span<const int> neighbors(int v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  int degree(int v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(int u, int v) const;
  int max_degree() const;

  /// Graph with vertex v renamed to perm[v].
  Graph relabeled(std::span<const int> perm) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_vertices_ == b.num_vertices_ && a.edges_ == b.edges_;
  }

 private:
  void build();

  int num_vertices_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> offsets_{0};
  std::vector<int> targets_;
};

}  // namespace pgg
