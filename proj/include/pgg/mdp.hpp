#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgg/game.hpp"

namespace pgg {

/// State of the independent-set construction process.
///
/// Holds a non-owning pointer to the instance; the instance must outlive
/// every state derived from it. Copying a state is the branching primitive
/// used by tree search.
class MdpState {
 public:
  explicit MdpState(const GameInstance& inst);

  const GameInstance& instance() const { return *inst_; }
  /// Chosen vertices in insertion order.
  std::span<const int> independent_set() const { return set_; }
  /// True for members of the set and their neighbors.
  bool blocked(int v) const { return blocked_[v] != 0; }
  int step_count() const { return static_cast<int>(set_.size()); }
  int num_valid() const { return inst_->num_players() - num_blocked_; }
  bool is_terminal() const { return num_valid() == 0; }

  /// Selectable vertices in ascending order.
  std::vector<int> valid_actions() const;

  /// Adds v to the set. Throws ContractError if v is blocked or out of range.
  void apply(int v);

 private:
  const GameInstance* inst_;
  std::vector<int> set_;
  std::vector<std::uint8_t> blocked_;
  int num_blocked_ = 0;
};

MdpState init_state(const GameInstance& inst);

inline std::vector<int> valid_actions(const MdpState& state) { return state.valid_actions(); }
inline bool is_terminal(const MdpState& state) { return state.is_terminal(); }

/// Objective of the profile induced by the state's set.
double terminal_value(const MdpState& state, Objective objective);

struct StepResult {
  MdpState state;
  double reward = 0.0;
};

/// Deterministic transition. Reward is the objective value when the successor
/// is terminal and 0 otherwise.
StepResult step(const MdpState& state, int action, Objective objective);

}  // namespace pgg
