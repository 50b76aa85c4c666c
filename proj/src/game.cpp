#include "pgg/game.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "pgg/errors.hpp"

namespace pgg {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void check_shape(const GameInstance& inst, const ActionProfile& profile) {
  if (profile.size() != inst.num_players()) {
    throw InputError("profile length " + std::to_string(profile.size()) +
                     " does not match player count " + std::to_string(inst.num_players()));
  }
  if (static_cast<int>(inst.costs.size()) != inst.num_players()) {
    throw InputError("instance cost vector length does not match player count");
  }
}

// Marks members in a mask, rejecting out-of-range vertices.
std::vector<std::uint8_t> membership(int n, std::span<const int> members) {
  std::vector<std::uint8_t> in(n, 0);
  for (int v : members) {
    if (v < 0 || v >= n) throw InputError("vertex " + std::to_string(v) + " out of range");
    in[v] = 1;
  }
  return in;
}

}  // namespace

std::string_view to_string(CostSetting setting) {
  return setting == CostSetting::kIdentical ? "IC" : "HC";
}

std::string_view to_string(Objective objective) {
  return objective == Objective::kSocialWelfare ? "SW" : "F";
}

std::optional<CostSetting> parse_cost_setting(std::string_view text) {
  const std::string t = lower(text);
  if (t == "ic") return CostSetting::kIdentical;
  if (t == "hc") return CostSetting::kHeterogeneous;
  return std::nullopt;
}

std::optional<Objective> parse_objective(std::string_view text) {
  const std::string t = lower(text);
  if (t == "sw" || t == "social_welfare") return Objective::kSocialWelfare;
  if (t == "f" || t == "fairness") return Objective::kFairness;
  return std::nullopt;
}

void GameInstance::validate() const {
  if (static_cast<int>(costs.size()) != num_players()) {
    throw InputError("instance " + instance_id + ": expected " +
                     std::to_string(num_players()) + " costs, got " +
                     std::to_string(costs.size()));
  }
  for (double c : costs) {
    if (!(c > 0.0 && c < 1.0)) {
      throw InputError("instance " + instance_id + ": cost outside (0,1)");
    }
    if (cost_setting == CostSetting::kIdentical && c != 0.5) {
      throw InputError("instance " + instance_id + ": IC costs must all equal 1/2");
    }
  }
}

ActionProfile ActionProfile::from_set(int num_players, std::span<const int> members) {
  return ActionProfile(membership(num_players, members));
}

std::vector<int> ActionProfile::contributors() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (actions_[i]) out.push_back(i);
  }
  return out;
}

std::vector<double> utilities(const GameInstance& inst, const ActionProfile& profile) {
  check_shape(inst, profile);
  const int n = inst.num_players();
  std::vector<double> u(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (profile.invests(i)) {
      u[i] = 1.0 - inst.costs[i];
      continue;
    }
    for (int j : inst.graph.neighbors(i)) {
      if (profile.invests(j)) {
        u[i] = 1.0;
        break;
      }
    }
  }
  return u;
}

double social_welfare(std::span<const double> utils) {
  if (utils.empty()) return 0.0;
  return std::accumulate(utils.begin(), utils.end(), 0.0) / static_cast<double>(utils.size());
}

double fairness(std::span<const double> utils) {
  const double total = std::accumulate(utils.begin(), utils.end(), 0.0);
  if (total <= 0.0) return 1.0;
  // sum_i sum_j |u_i - u_j| = 2 * sum_k u_(k) * (2k - n + 1) over ascending order.
  std::vector<double> sorted(utils.begin(), utils.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double pairwise = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    pairwise += sorted[k] * (2.0 * static_cast<double>(k) - n + 1.0);
  }
  const double value = 1.0 - (2.0 * pairwise) / (2.0 * n * total);
  return std::clamp(value, 0.0, 1.0);
}

double evaluate(Objective objective, std::span<const double> utils) {
  return objective == Objective::kSocialWelfare ? social_welfare(utils) : fairness(utils);
}

double social_welfare(const GameInstance& inst, const ActionProfile& profile) {
  return social_welfare(utilities(inst, profile));
}

double fairness(const GameInstance& inst, const ActionProfile& profile) {
  return fairness(utilities(inst, profile));
}

double evaluate(Objective objective, const GameInstance& inst, const ActionProfile& profile) {
  return evaluate(objective, utilities(inst, profile));
}

double evaluate_set(Objective objective, const GameInstance& inst,
                    std::span<const int> members) {
  return evaluate(objective, inst, ActionProfile::from_set(inst.num_players(), members));
}

bool is_psne(const GameInstance& inst, const ActionProfile& profile) {
  check_shape(inst, profile);
  for (int i = 0; i < inst.num_players(); ++i) {
    bool neighbor_invests = false;
    for (int j : inst.graph.neighbors(i)) {
      if (profile.invests(j)) {
        neighbor_invests = true;
        break;
      }
    }
    if (profile.invests(i) == neighbor_invests) return false;
  }
  return true;
}

bool is_independent_set(const Graph& g, std::span<const int> members) {
  const auto in = membership(g.num_vertices(), members);
  for (const Edge& e : g.edges()) {
    if (in[e.first] && in[e.second]) return false;
  }
  return true;
}

bool is_maximal_is(const Graph& g, std::span<const int> members) {
  if (!is_independent_set(g, members)) return false;
  const auto in = membership(g.num_vertices(), members);
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (in[v]) continue;
    auto nb = g.neighbors(v);
    if (std::none_of(nb.begin(), nb.end(), [&](int u) { return in[u] != 0; })) return false;
  }
  return true;
}

}  // namespace pgg
