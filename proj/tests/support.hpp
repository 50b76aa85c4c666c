#pragma once

// Fixtures and independent reference implementations shared by the suites.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "pgg/game.hpp"
#include "pgg/graphgen.hpp"
#include "pgg/rng.hpp"

namespace pgg::test {

inline GameInstance make_instance(int n, std::vector<std::pair<int, int>> edges,
                                  std::vector<double> costs = {}) {
  GameInstance inst;
  inst.graph = Graph(n, edges);
  if (costs.empty()) {
    inst.costs.assign(n, 0.5);
    inst.cost_setting = CostSetting::kIdentical;
  } else {
    inst.costs = std::move(costs);
    inst.cost_setting = CostSetting::kHeterogeneous;
  }
  inst.instance_id = "fixture";
  return inst;
}

inline GameInstance path3(std::vector<double> costs = {}) {
  return make_instance(3, {{0, 1}, {1, 2}}, std::move(costs));
}

inline GameInstance star5() { return make_instance(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}); }

inline ActionProfile profile(std::vector<std::uint8_t> bits) { return ActionProfile(std::move(bits)); }

// Utility straight from the case split, with the closed neighborhood spelled out.
inline double oracle_utility(const GameInstance& inst, const std::vector<int>& a, int i) {
  if (a[i] == 1) return 1.0 - inst.costs[i];
  for (int j : inst.graph.neighbors(i)) {
    if (a[j] == 1) return 1.0;
  }
  return 0.0;
}

// Equilibrium check by trying every unilateral flip.
inline bool oracle_is_psne(const GameInstance& inst, const std::vector<int>& a) {
  std::vector<int> b = a;
  for (int i = 0; i < inst.num_players(); ++i) {
    const double here = oracle_utility(inst, a, i);
    b[i] = 1 - a[i];
    const double flipped = oracle_utility(inst, b, i);
    b[i] = a[i];
    if (flipped > here) return false;
  }
  return true;
}

// 1 - sum_i sum_j |u_i - u_j| / (2 n sum_j u_j), 1 when the sum is zero.
inline double oracle_fairness(const std::vector<double>& u) {
  const double n = static_cast<double>(u.size());
  double total = 0.0, gap = 0.0;
  for (double x : u) total += x;
  if (total == 0.0) return 1.0;
  for (double x : u) {
    for (double y : u) gap += std::fabs(x - y);
  }
  return 1.0 - gap / (2.0 * n * total);
}

// Maximal independent sets by subset enumeration, as bitmasks.
inline std::vector<std::uint32_t> oracle_maximal_sets(const Graph& g) {
  const int n = g.num_vertices();
  std::vector<std::uint32_t> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool independent = true;
    for (const Edge& e : g.edges()) {
      if ((mask >> e.first & 1u) && (mask >> e.second & 1u)) independent = false;
    }
    if (!independent) continue;
    bool maximal = true;
    for (int v = 0; v < n && maximal; ++v) {
      if (mask >> v & 1u) continue;
      bool covered = false;
      for (int u : g.neighbors(v)) covered = covered || (mask >> u & 1u);
      maximal = covered;
    }
    if (maximal) out.push_back(mask);
  }
  return out;
}

inline std::vector<int> bits_to_profile(std::uint32_t mask, int n) {
  std::vector<int> a(n);
  for (int i = 0; i < n; ++i) a[i] = static_cast<int>(mask >> i & 1u);
  return a;
}

// Random instance over the three generators with mixed cost settings.
inline GameInstance random_instance(std::uint64_t seed, int n) {
  Rng rng(seed);
  GraphModelConfig cfg;
  cfg.n = n;
  cfg.model = static_cast<GraphModel>(rng.uniform_index(3));
  if (cfg.model == GraphModel::kBarabasiAlbert && n <= cfg.ba_attachment) cfg.model = GraphModel::kErdosRenyi;
  if (cfg.model == GraphModel::kWattsStrogatz && n <= cfg.ws_neighbors) cfg.model = GraphModel::kErdosRenyi;
  const CostSetting cost = rng.bernoulli(0.5) ? CostSetting::kHeterogeneous : CostSetting::kIdentical;
  GameInstance inst;
  inst.graph = generate_graph(cfg, mix_seed(seed, 1));
  inst.costs = sample_costs(n, cost, mix_seed(seed, 2));
  inst.cost_setting = cost;
  inst.instance_id = "random/" + std::to_string(seed);
  return inst;
}

}  // namespace pgg::test
