#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgg/graph.hpp"

namespace pgg {

enum class CostSetting { kIdentical, kHeterogeneous };
enum class Objective { kSocialWelfare, kFairness };

std::string_view to_string(CostSetting setting);  // "IC" / "HC"
std::string_view to_string(Objective objective);  // "SW" / "F"
/// Accepts "IC"/"HC" in any case.
std::optional<CostSetting> parse_cost_setting(std::string_view text);
/// Accepts "sw"/"f" in any case (also "fairness", "social_welfare").
std::optional<Objective> parse_objective(std::string_view text);

/// One best-shot public goods game: graph, per-player investment costs in (0,1).
struct GameInstance {
  Graph graph;
  std::vector<double> costs;
  CostSetting cost_setting = CostSetting::kIdentical;
  std::string instance_id;

  int num_players() const { return graph.num_vertices(); }

  /// Throws InputError if the cost vector breaks the instance invariants.
  void validate() const;
};

/// Binary investment decision per player (1 = invest).
class ActionProfile {
 public:
  ActionProfile() = default;
  explicit ActionProfile(int num_players) : actions_(num_players, 0) {}
  explicit ActionProfile(std::vector<std::uint8_t> actions) : actions_(std::move(actions)) {}

  /// Profile with a_i = 1 iff i is in `members`. Throws InputError on bad index.
  static ActionProfile from_set(int num_players, std::span<const int> members);

  int size() const { return static_cast<int>(actions_.size()); }
  bool invests(int i) const { return actions_[i] != 0; }
  void set(int i, bool invest) { actions_[i] = invest ? 1 : 0; }
  std::span<const std::uint8_t> values() const { return actions_; }

  /// Indices of investing players, ascending.
  std::vector<int> contributors() const;

  friend bool operator==(const ActionProfile&, const ActionProfile&) = default;

 private:
  std::vector<std::uint8_t> actions_;
};

inline ActionProfile profile_from_set(int num_players, std::span<const int> members) {
  return ActionProfile::from_set(num_players, members);
}

/// Best-shot payoffs: 1-c_i for investors, 1 for covered free riders, 0 otherwise.
std::vector<double> utilities(const GameInstance& inst, const ActionProfile& profile);

/// Mean utility; 0 for an empty game.
double social_welfare(std::span<const double> utils);
/// One minus the Gini coefficient; 1 when every utility is zero.
double fairness(std::span<const double> utils);
double evaluate(Objective objective, std::span<const double> utils);

double social_welfare(const GameInstance& inst, const ActionProfile& profile);
double fairness(const GameInstance& inst, const ActionProfile& profile);
double evaluate(Objective objective, const GameInstance& inst, const ActionProfile& profile);

/// Objective of the equilibrium induced by a maximal independent set.
double evaluate_set(Objective objective, const GameInstance& inst, std::span<const int> members);

/// Pure-strategy Nash check via the best-shot characterization: investors
/// have no investing neighbor, non-investors have at least one.
bool is_psne(const GameInstance& inst, const ActionProfile& profile);

bool is_independent_set(const Graph& g, std::span<const int> members);
bool is_maximal_is(const Graph& g, std::span<const int> members);

}  // namespace pgg
