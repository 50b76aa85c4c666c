#include "pgg/mdp.hpp"

#include <string>

#include "pgg/errors.hpp"

namespace pgg {

MdpState::MdpState(const GameInstance& inst)
    : inst_(&inst), blocked_(static_cast<std::size_t>(inst.num_players()), 0) {}

std::vector<int> MdpState::valid_actions() const {
  std::vector<int> out;
  out.reserve(num_valid());
  for (int v = 0; v < inst_->num_players(); ++v) {
    if (!blocked_[v]) out.push_back(v);
  }
  return out;
}

void MdpState::apply(int v) {
  if (v < 0 || v >= inst_->num_players()) {
    throw ContractError("mdp: action " + std::to_string(v) + " out of range");
  }
  if (blocked_[v]) {
    throw ContractError("mdp: action " + std::to_string(v) + " is not a valid action");
  }
  set_.push_back(v);
  blocked_[v] = 1;
  ++num_blocked_;
  for (int u : inst_->graph.neighbors(v)) {
    if (!blocked_[u]) {
      blocked_[u] = 1;
      ++num_blocked_;
    }
  }
}

MdpState init_state(const GameInstance& inst) { return MdpState(inst); }

double terminal_value(const MdpState& state, Objective objective) {
  return evaluate_set(objective, state.instance(), state.independent_set());
}

StepResult step(const MdpState& state, int action, Objective objective) {
  StepResult result{state, 0.0};
  result.state.apply(action);
  if (result.state.is_terminal()) result.reward = terminal_value(result.state, objective);
  return result;
}

}  // namespace pgg
