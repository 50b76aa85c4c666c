#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "pgg/game.hpp"
#include "pgg/rng.hpp"

namespace pgg {

struct MethodResult {
  ActionProfile profile;
  double value = 0.0;
};

/// Largest game exhaustive_search accepts.
inline constexpr int kExhaustiveMaxPlayers = 20;

/// Best equilibrium over all 2^n profiles; ties go to the lowest encoding
/// sum_i a_i 2^i. Throws ConfigError above kExhaustiveMaxPlayers.
MethodResult exhaustive_search(const GameInstance& inst, Objective objective);

/// Every equilibrium of the game as a bitmask (bit i = a_i), ascending.
std::vector<std::uint32_t> enumerate_psne(const GameInstance& inst);

struct BestResponseResult {
  ActionProfile profile;
  double value = 0.0;
  int sweeps = 0;
};

/// Repeated best-response sweeps in fresh random orders until a full sweep
/// changes nothing. `pinned` (if >= 0) keeps that player's action fixed.
/// Returns the number of sweeps performed, including the final quiet one.
/// Throws std::logic_error after 10n sweeps.
int best_response_sweeps(const GameInstance& inst, ActionProfile& profile, Rng& rng,
                         int pinned = -1);

/// Best-response dynamics from an i.i.d. Bernoulli(1/2) start.
BestResponseResult best_response(const GameInstance& inst, Objective objective,
                                 std::uint64_t seed);
/// Same dynamics from a caller-supplied start.
BestResponseResult best_response_from(const GameInstance& inst, Objective objective,
                                      ActionProfile start, std::uint64_t seed);

struct Transfer {
  int payer = -1;
  int payee = -1;
  double amount = 0.0;
};

struct PayoffTransferResult {
  ActionProfile profile;
  double value = 0.0;
  std::vector<Transfer> transfers;
  /// Base utilities plus received minus paid transfers.
  std::vector<double> adjusted_utilities;
};

/// Best-response dynamics with side payments. A player with no access to the
/// good pays its cheapest neighbor j (if c_j <= own cost) exactly c_j to
/// invest instead of investing itself; paid investors stay committed.
PayoffTransferResult payoff_transfer(const GameInstance& inst, Objective objective,
                                     std::uint64_t seed);

struct SaConfig {
  double epsilon = 10.0;
  long no_improve_limit = 10'000;
  long step_cutoff = 10'000'000;
  std::uint64_t seed = 0;
  /// Record the best-so-far value after every step.
  bool trace = false;
  /// Score equilibria during the search as if every cost were 1/2; the
  /// returned value still uses the true costs. The trace holds proxy scores.
  bool identical_cost_proxy = false;

  void validate() const;
};

inline const std::vector<double> kEpsilonGrid = {1e1, 1e2, 1e3, 1e4};

struct SaResult {
  ActionProfile profile;
  double value = 0.0;
  long steps = 0;
  std::vector<double> best_trace;
};

/// Annealing over equilibria: force a random non-investor to invest, restore an
/// equilibrium with best-response dynamics, accept with probability
/// min(1, exp(epsilon * delta)). Returns the best equilibrium visited.
SaResult simulated_annealing(const GameInstance& inst, Objective objective,
                             const SaConfig& config);

/// Metropolis acceptance probability used by simulated_annealing.
double sa_acceptance(double delta, double epsilon);

/// Uniformly random construction of a maximal independent set.
MethodResult random_mis(const GameInstance& inst, Objective objective, std::uint64_t seed);
/// Repeatedly picks the available vertex of highest degree (lowest index on ties).
MethodResult target_hubs(const GameInstance& inst, Objective objective);
/// Repeatedly picks the available vertex of lowest cost. HC instances only.
MethodResult target_lowest_cost(const GameInstance& inst, Objective objective);

}  // namespace pgg
