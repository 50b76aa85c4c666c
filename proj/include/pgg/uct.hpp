#pragma once

#include <cstdint>
#include <vector>

#include "pgg/demonstration.hpp"
#include "pgg/game.hpp"
#include "pgg/mdp.hpp"
#include "pgg/rng.hpp"

namespace pgg {

struct UctConfig {
  double cp = 0.5;
  /// Simulations per move are factor * n.
  int sims_per_move_factor = 20;
  /// Break selection/commitment ties uniformly at random instead of by lowest vertex.
  bool random_tie_break = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exploration constants searched during tuning.
inline const std::vector<double> kCpGrid = {0.05, 0.1, 0.25, 0.5, 1.0, 2.5};

struct ChildEdge {
  int action = -1;
  int node = -1;  // index into SearchTree::nodes()
  long visits = 0;
  double return_sum = 0.0;
};

struct SearchNode {
  MdpState state;
  long visits = 0;
  std::vector<ChildEdge> children;  // ascending action order
  std::vector<int> untried;         // descending, so back() is the lowest index
  double terminal_reward = 0.0;
};

class SearchTree;

/// Runs n_sims select/expand/rollout/backup iterations from `root` with
/// exploration constant config.cp * cp_scale. Throws ContractError on a
/// terminal root.
SearchTree run_simulations(const MdpState& root, const UctConfig& config, Objective objective,
                           long n_sims, Rng& rng, double cp_scale = 1.0);

class SearchTree {
 public:
  explicit SearchTree(const MdpState& root, Objective objective);

  const SearchNode& root() const { return nodes_.front(); }
  const std::vector<SearchNode>& nodes() const { return nodes_; }

  /// C(s,a) for every valid root action in ascending order (0 when unvisited).
  std::vector<long> root_visit_counts() const;
  /// Mean of all returns backed up through the root.
  double root_mean_return() const;

 private:
  friend SearchTree run_simulations(const MdpState&, const UctConfig&, Objective, long, Rng&,
                                    double);
  int add_node(MdpState state, Objective objective);

  std::vector<SearchNode> nodes_;
};

/// R/C + 2*cp*sqrt(2 ln C(s) / C(s,a)).
double uct_score(double return_sum, long child_visits, long parent_visits, double cp_effective);

/// Most visited root child; ties by lowest vertex unless `tie_rng` is given.
int robust_child(const SearchNode& root, Rng* tie_rng = nullptr);

struct PlanResult {
  std::vector<int> independent_set;
  double value = 0.0;
  std::vector<Demonstration> demonstrations;
};

/// Plans a full episode with a fresh tree per move and commits the robust child.
PlanResult plan_episode(const GameInstance& inst, const UctConfig& config, Objective objective,
                        bool record_demonstrations = true);

}  // namespace pgg
