#include "pgg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pgg/errors.hpp"
#include "pgg/mdp.hpp"

namespace pgg {
namespace {

bool neighbor_invests(const GameInstance& inst, const ActionProfile& profile, int i) {
  for (int j : inst.graph.neighbors(i)) {
    if (profile.invests(j)) return true;
  }
  return false;
}

std::vector<int> identity_order(int n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

int sweep_cap(int n) { return std::max(10 * n, 1); }

ActionProfile random_profile(int n, Rng& rng) {
  ActionProfile p(n);
  for (int i = 0; i < n; ++i) p.set(i, rng.bernoulli(0.5));
  return p;
}

MethodResult finish(const GameInstance& inst, Objective objective, const MdpState& state) {
  MethodResult r;
  r.profile = ActionProfile::from_set(inst.num_players(), state.independent_set());
  r.value = evaluate(objective, inst, r.profile);
  return r;
}

template <typename Better>
MethodResult greedy_construction(const GameInstance& inst, Objective objective, Better better) {
  MdpState state(inst);
  while (!state.is_terminal()) {
    int pick = -1;
    for (int v = 0; v < inst.num_players(); ++v) {
      if (state.blocked(v)) continue;
      if (pick < 0 || better(v, pick)) pick = v;
    }
    state.apply(pick);
  }
  return finish(inst, objective, state);
}

}  // namespace

std::vector<std::uint32_t> enumerate_psne(const GameInstance& inst) {
  const int n = inst.num_players();
  if (n > kExhaustiveMaxPlayers) {
    throw ConfigError("exhaustive search is limited to n <= " +
                      std::to_string(kExhaustiveMaxPlayers) + " (n=" + std::to_string(n) +
                      "); use the UCT planner for larger games");
  }
  std::vector<std::uint32_t> nbr(n, 0);
  for (const Edge& e : inst.graph.edges()) {
    nbr[e.first] |= 1U << e.second;
    nbr[e.second] |= 1U << e.first;
  }
  std::vector<std::uint32_t> out;
  const std::uint32_t total = 1U << n;
  for (std::uint32_t a = 0; a < total; ++a) {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const bool invests = (a >> i) & 1U;
      const bool covered = (a & nbr[i]) != 0;
      ok = invests != covered;
    }
    if (ok) out.push_back(a);
  }
  return out;
}

MethodResult exhaustive_search(const GameInstance& inst, Objective objective) {
  const int n = inst.num_players();
  MethodResult best;
  bool found = false;
  for (std::uint32_t a : enumerate_psne(inst)) {
    ActionProfile p(n);
    for (int i = 0; i < n; ++i) p.set(i, (a >> i) & 1U);
    const double v = evaluate(objective, inst, p);
    if (!found || v > best.value) {
      best = {std::move(p), v};
      found = true;
    }
  }
  if (!found) best = {ActionProfile(n), evaluate(objective, inst, ActionProfile(n))};
  return best;
}

int best_response_sweeps(const GameInstance& inst, ActionProfile& profile, Rng& rng,
                         int pinned) {
  const int n = inst.num_players();
  if (profile.size() != n) throw InputError("best response: profile length mismatch");
  std::vector<int> order = identity_order(n);
  const int cap = sweep_cap(n);
  for (int sweep = 1; sweep <= cap; ++sweep) {
    rng.shuffle(std::span<int>(order));
    bool changed = false;
    for (int i : order) {
      if (i == pinned) continue;
      const bool respond = !neighbor_invests(inst, profile, i);
      if (respond != profile.invests(i)) {
        profile.set(i, respond);
        changed = true;
      }
    }
    if (!changed) return sweep;
  }
  throw std::logic_error("best response did not converge within " + std::to_string(cap) +
                         " sweeps");
}

BestResponseResult best_response_from(const GameInstance& inst, Objective objective,
                                      ActionProfile start, std::uint64_t seed) {
  Rng rng(seed);
  BestResponseResult r{std::move(start), 0.0, 0};
  r.sweeps = best_response_sweeps(inst, r.profile, rng);
  r.value = evaluate(objective, inst, r.profile);
  return r;
}

BestResponseResult best_response(const GameInstance& inst, Objective objective,
                                 std::uint64_t seed) {
  Rng rng(seed);
  ActionProfile start = random_profile(inst.num_players(), rng);
  BestResponseResult r{std::move(start), 0.0, 0};
  r.sweeps = best_response_sweeps(inst, r.profile, rng);
  r.value = evaluate(objective, inst, r.profile);
  return r;
}

PayoffTransferResult payoff_transfer(const GameInstance& inst, Objective objective,
                                     std::uint64_t seed) {
  const int n = inst.num_players();
  Rng rng(seed);
  ActionProfile profile = random_profile(n, rng);
  std::vector<std::uint8_t> paid(n, 0);  // committed by an incoming transfer
  std::vector<std::uint8_t> payer(n, 0);
  std::vector<Transfer> transfers;

  // Picks the neighbor a player without access would pay: lowest cost, then
  // highest degree, then lowest index. -1 if investing itself is cheaper.
  auto choose_payee = [&](int i) {
    int best = -1;
    for (int j : inst.graph.neighbors(i)) {
      if (inst.costs[j] > inst.costs[i]) continue;
      if (best < 0 || inst.costs[j] < inst.costs[best] ||
          (inst.costs[j] == inst.costs[best] &&
           inst.graph.degree(j) > inst.graph.degree(best))) {
        best = j;
      }
    }
    return best;
  };

  std::vector<int> order = identity_order(n);
  const int cap = sweep_cap(n) + n;
  bool stable = false;
  for (int sweep = 0; sweep < cap && !stable; ++sweep) {
    rng.shuffle(std::span<int>(order));
    bool changed = false;
    for (int i : order) {
      if (paid[i]) continue;  // indifferent, stays invested
      const bool covered = neighbor_invests(inst, profile, i);
      if (profile.invests(i)) {
        if (covered) {
          profile.set(i, false);
          changed = true;
        }
        continue;
      }
      if (covered) continue;
      const int j = payer[i] ? -1 : choose_payee(i);
      if (j >= 0 && !profile.invests(j)) {
        profile.set(j, true);
        paid[j] = 1;
        payer[i] = 1;
        transfers.push_back({i, j, inst.costs[j]});
      } else {
        profile.set(i, true);
      }
      changed = true;
    }
    stable = !changed;
  }
  if (!stable) throw std::logic_error("payoff transfer dynamics did not converge");

  PayoffTransferResult r;
  r.adjusted_utilities = utilities(inst, profile);
  for (const Transfer& t : transfers) {
    r.adjusted_utilities[t.payer] -= t.amount;
    r.adjusted_utilities[t.payee] += t.amount;
  }
  for (double& u : r.adjusted_utilities) u = std::clamp(u, 0.0, 1.0);
  r.value = evaluate(objective, r.adjusted_utilities);
  r.profile = std::move(profile);
  r.transfers = std::move(transfers);
  return r;
}

void SaConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("sa: epsilon must be positive");
  if (no_improve_limit < 1 || step_cutoff < 1) throw ConfigError("sa: limits must be positive");
}

double sa_acceptance(double delta, double epsilon) {
  if (delta >= 0.0) return 1.0;
  return std::exp(epsilon * delta);
}

SaResult simulated_annealing(const GameInstance& inst, Objective objective,
                             const SaConfig& config) {
  config.validate();
  const int n = inst.num_players();
  Rng rng(config.seed);
  GameInstance proxy;
  if (config.identical_cost_proxy) {
    proxy = inst;
    std::fill(proxy.costs.begin(), proxy.costs.end(), 0.5);
    proxy.cost_setting = CostSetting::kIdentical;
  }
  const GameInstance& scored = config.identical_cost_proxy ? proxy : inst;
  ActionProfile current = random_profile(n, rng);
  best_response_sweeps(inst, current, rng);
  double current_value = evaluate(objective, scored, current);

  SaResult r{current, current_value, 0, {}};
  long since_improvement = 0;
  std::vector<int> idle;
  while (r.steps < config.step_cutoff && since_improvement < config.no_improve_limit) {
    idle.clear();
    for (int i = 0; i < n; ++i) {
      if (!current.invests(i)) idle.push_back(i);
    }
    if (idle.empty()) break;  // the only equilibrium: every player isolated
    ++r.steps;

    ActionProfile candidate = current;
    const int forced = idle[rng.uniform_index(idle.size())];
    candidate.set(forced, true);
    best_response_sweeps(inst, candidate, rng, forced);
    best_response_sweeps(inst, candidate, rng);
    const double value = evaluate(objective, scored, candidate);

    if (rng.uniform01() < sa_acceptance(value - current_value, config.epsilon)) {
      current = std::move(candidate);
      current_value = value;
    }
    if (current_value > r.value) {
      r.value = current_value;
      r.profile = current;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (config.trace) r.best_trace.push_back(r.value);
  }
  if (config.identical_cost_proxy) r.value = evaluate(objective, inst, r.profile);
  return r;
}

MethodResult random_mis(const GameInstance& inst, Objective objective, std::uint64_t seed) {
  Rng rng(seed);
  MdpState state(inst);
  while (!state.is_terminal()) {
    const auto actions = state.valid_actions();
    state.apply(actions[rng.uniform_index(actions.size())]);
  }
  return finish(inst, objective, state);
}

MethodResult target_hubs(const GameInstance& inst, Objective objective) {
  return greedy_construction(inst, objective, [&](int v, int pick) {
    return inst.graph.degree(v) > inst.graph.degree(pick);
  });
}

MethodResult target_lowest_cost(const GameInstance& inst, Objective objective) {
  if (inst.cost_setting != CostSetting::kHeterogeneous) {
    throw ConfigError("target lowest cost only applies to heterogeneous-cost instances");
  }
  return greedy_construction(inst, objective,
                             [&](int v, int pick) { return inst.costs[v] < inst.costs[pick]; });
}

}  // namespace pgg
