#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "pgg/game.hpp"
#include "pgg/mdp.hpp"

namespace pgg {

/// One recorded search decision: the state, its valid actions, and the root
/// visit count the planner assigned to each of them.
struct Demonstration {
  std::shared_ptr<const GameInstance> instance;
  std::vector<int> independent_set;
  std::vector<int> valid_actions;
  std::vector<long> visit_counts;

  int num_players() const { return instance->num_players(); }
  long total_visits() const;
  /// Replays the independent set on a fresh state.
  MdpState state() const;
  /// Throws InputError if counts/actions disagree with the recomputed state.
  void validate() const;
};

/// JSON lines with instance_id, edges, n, independent_set, valid_actions,
/// visit_counts; costs and cost_setting are written as extra keys so that
/// cost-aware features can be rebuilt on load.
void write_demonstrations(const std::filesystem::path& path,
                          const std::vector<Demonstration>& demos);
/// Lines sharing an instance_id share one instance. Missing costs default to IC.
std::vector<Demonstration> read_demonstrations(const std::filesystem::path& path);

}  // namespace pgg
