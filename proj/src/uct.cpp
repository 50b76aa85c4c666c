#include "pgg/uct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "pgg/errors.hpp"

namespace pgg {

void UctConfig::validate() const {
  if (!(cp > 0.0)) throw ConfigError("uct: cp must be positive");
  if (sims_per_move_factor < 1) throw ConfigError("uct: sims factor must be at least 1");
}

SearchTree::SearchTree(const MdpState& root, Objective objective) {
  nodes_.reserve(64);
  add_node(root, objective);
}

int SearchTree::add_node(MdpState state, Objective objective) {
  SearchNode node{std::move(state), 0, {}, {}, 0.0};
  if (node.state.is_terminal()) {
    node.terminal_reward = terminal_value(node.state, objective);
  } else {
    node.untried = node.state.valid_actions();
    std::reverse(node.untried.begin(), node.untried.end());
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

std::vector<long> SearchTree::root_visit_counts() const {
  const SearchNode& r = root();
  const auto actions = r.state.valid_actions();
  std::vector<long> counts(actions.size(), 0);
  for (const ChildEdge& e : r.children) {
    auto it = std::lower_bound(actions.begin(), actions.end(), e.action);
    counts[it - actions.begin()] = e.visits;
  }
  return counts;
}

double SearchTree::root_mean_return() const {
  long visits = 0;
  double total = 0.0;
  for (const ChildEdge& e : root().children) {
    visits += e.visits;
    total += e.return_sum;
  }
  return visits > 0 ? total / static_cast<double>(visits) : 0.0;
}

double uct_score(double return_sum, long child_visits, long parent_visits, double cp_effective) {
  const double c = static_cast<double>(child_visits);
  return return_sum / c +
         2.0 * cp_effective * std::sqrt(2.0 * std::log(static_cast<double>(parent_visits)) / c);
}

namespace {

// Uniform random completion of `state` to a maximal independent set. Keeps
// the unblocked vertices in an indexable list so each draw is O(1).
class Rollout {
 public:
  double run(MdpState state, Objective objective, Rng& rng) {
    const int n = state.instance().num_players();
    pool_.clear();
    pos_.assign(n, -1);
    for (int v = 0; v < n; ++v) {
      if (!state.blocked(v)) {
        pos_[v] = static_cast<int>(pool_.size());
        pool_.push_back(v);
      }
    }
    while (!pool_.empty()) {
      const int v = pool_[rng.uniform_index(pool_.size())];
      state.apply(v);
      remove(v);
      for (int u : state.instance().graph.neighbors(v)) remove(u);
    }
    return terminal_value(state, objective);
  }

 private:
  void remove(int v) {
    const int p = pos_[v];
    if (p < 0) return;
    const int last = pool_.back();
    pool_[p] = last;
    pos_[last] = p;
    pool_.pop_back();
    pos_[v] = -1;
  }

  std::vector<int> pool_;
  std::vector<int> pos_;
};

}  // namespace

SearchTree run_simulations(const MdpState& root, const UctConfig& config, Objective objective,
                           long n_sims, Rng& rng, double cp_scale) {
  if (root.is_terminal()) throw ContractError("uct: search started from a terminal state");
  const double cp_eff = config.cp * cp_scale;
  SearchTree tree(root, objective);
  auto& nodes = tree.nodes_;
  Rollout rollout;
  std::vector<std::pair<int, int>> path;  // (node, child edge)
  std::vector<int> ties;

  for (long sim = 0; sim < n_sims; ++sim) {
    path.clear();
    int node = 0;
    double value = 0.0;
    while (true) {
      if (nodes[node].state.is_terminal()) {
        value = nodes[node].terminal_reward;
        break;
      }
      if (!nodes[node].untried.empty()) {
        const int action = nodes[node].untried.back();
        nodes[node].untried.pop_back();
        MdpState next = nodes[node].state;
        next.apply(action);
        const int child = tree.add_node(std::move(next), objective);
        nodes[node].children.push_back({action, child, 0, 0.0});
        path.emplace_back(node, static_cast<int>(nodes[node].children.size()) - 1);
        value = nodes[child].state.is_terminal()
                    ? nodes[child].terminal_reward
                    : rollout.run(nodes[child].state, objective, rng);
        node = child;
        break;
      }
      const SearchNode& cur = nodes[node];
      double best = -std::numeric_limits<double>::infinity();
      int best_edge = 0;
      ties.clear();
      for (int i = 0; i < static_cast<int>(cur.children.size()); ++i) {
        const ChildEdge& e = cur.children[i];
        const double score = uct_score(e.return_sum, e.visits, cur.visits, cp_eff);
        if (score > best) {
          best = score;
          best_edge = i;
          ties.assign(1, i);
        } else if (score == best) {
          ties.push_back(i);
        }
      }
      if (config.random_tie_break && ties.size() > 1) {
        best_edge = ties[rng.uniform_index(ties.size())];
      }
      path.emplace_back(node, best_edge);
      node = cur.children[best_edge].node;
    }
    nodes[node].visits += 1;
    for (auto [n, e] : path) {
      nodes[n].visits += 1;
      nodes[n].children[e].visits += 1;
      nodes[n].children[e].return_sum += value;
    }
  }
  return tree;
}

int robust_child(const SearchNode& root, Rng* tie_rng) {
  if (root.children.empty()) {
    const auto actions = root.state.valid_actions();
    if (actions.empty()) throw ContractError("uct: robust_child on a node without actions");
    return actions.front();
  }
  long best = -1;
  std::vector<int> ties;
  for (const ChildEdge& e : root.children) {
    if (e.visits > best) {
      best = e.visits;
      ties.assign(1, e.action);
    } else if (e.visits == best) {
      ties.push_back(e.action);
    }
  }
  if (tie_rng != nullptr && ties.size() > 1) return ties[tie_rng->uniform_index(ties.size())];
  return *std::min_element(ties.begin(), ties.end());
}

PlanResult plan_episode(const GameInstance& inst, const UctConfig& config, Objective objective,
                        bool record_demonstrations) {
  config.validate();
  std::shared_ptr<const GameInstance> shared;
  if (record_demonstrations) shared = std::make_shared<const GameInstance>(inst);
  const GameInstance& game = shared ? *shared : inst;

  Rng rng(config.seed);
  MdpState state(game);
  PlanResult result;
  const long n_sims = static_cast<long>(config.sims_per_move_factor) * game.num_players();
  double cp_scale = 1.0;
  while (!state.is_terminal()) {
    SearchTree tree = run_simulations(state, config, objective, n_sims, rng, cp_scale);
    if (record_demonstrations) {
      result.demonstrations.push_back(
          {shared,
           std::vector<int>(state.independent_set().begin(), state.independent_set().end()),
           state.valid_actions(), tree.root_visit_counts()});
    }
    const int action = robust_child(tree.root(), config.random_tie_break ? &rng : nullptr);
    cp_scale = tree.root_mean_return();
    state.apply(action);
  }
  result.independent_set.assign(state.independent_set().begin(), state.independent_set().end());
  result.value = terminal_value(state, objective);
  return result;
}

}  // namespace pgg
