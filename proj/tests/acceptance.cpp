// Acceptance checks for criteria 1-8. Prints one PASS/FAIL line per criterion;
// the exit status is nonzero if any criterion fails.
//
// usage: acceptance [--keep DIR] [--only N,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "pgg/baselines.hpp"
#include "pgg/harness.hpp"
#include "pgg/mdp.hpp"
#include "pgg/serialize.hpp"
#include "support.hpp"
#include "tempdir.hpp"

using namespace pgg;
using namespace pgg::test;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr int kOracleGraphs = 200;
constexpr double kOracleSeconds = 120.0;
constexpr int kNearOptimalInstances = 30;
constexpr double kNearOptimalRatio = 0.98;
constexpr double kNearOptimalSeconds = 30 * 60.0;
constexpr double kOrderingMargin = 0.02;
constexpr double kReferenceTolerance = 0.03;
constexpr double kFidelityRatio = 0.97;
constexpr double kFidelitySeconds = 60 * 60.0;
constexpr int kFidelityMaxSteps = 2000;
constexpr double kSpeedRatio = 100.0;
constexpr int kGradFixtures = 10;
constexpr double kGradTolerance = 1e-4;
constexpr int kFuzzEpisodes = 10'000;
constexpr int kBrInstances = 1000;
constexpr int kSaTraces = 50;

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void progress(const std::string& line) { std::cerr << "  " << line << "\n"; }

int instance_index(const std::string& id) { return std::stoi(id.substr(id.rfind('/') + 1)); }

std::string cell(const ResultRecord& r) { return r.cost_setting + "-" + r.model + "-" + r.objective; }

// Mean value per cell for one method, optionally restricted to the first `limit` instances.
std::map<std::string, double> cell_means(const std::vector<ResultRecord>& records, const std::string& method,
                                         int limit = -1) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (r.method != method) continue;
    if (limit >= 0 && instance_index(r.instance_id) >= limit) continue;
    auto& [sum, count] = acc[cell(r)];
    sum += r.value;
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [key, sc] : acc) out[key] = sc.first / sc.second;
  return out;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Clock clock;
  Rng rng(101);
  int mismatches = 0, equilibria = 0;
  for (int g = 0; g < kOracleGraphs; ++g) {
    const int n = 4 + static_cast<int>(rng.uniform_index(9));
    const auto inst = random_instance(rng.next(), n);
    // Game side: every profile where no single flip raises the flipper's utility.
    std::vector<std::uint32_t> psne;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      auto bits = bits_to_profile(mask, n);
      const auto base = utilities(inst, ActionProfile(std::vector<std::uint8_t>(bits.begin(), bits.end())));
      bool stable = true;
      for (int i = 0; i < n && stable; ++i) {
        bits[i] ^= 1;
        const auto flipped = utilities(inst, ActionProfile(std::vector<std::uint8_t>(bits.begin(), bits.end())));
        bits[i] ^= 1;
        stable = flipped[i] <= base[i];
      }
      if (stable) psne.push_back(mask);
    }
    // Graph side: maximal independent sets.
    const auto mis = oracle_maximal_sets(inst.graph);
    if (psne != mis || enumerate_psne(inst) != mis) ++mismatches;
    equilibria += static_cast<int>(psne.size());
  }
  const double secs = clock.seconds();
  return {mismatches == 0 && secs < kOracleSeconds,
          std::to_string(kOracleGraphs) + " graphs, " + std::to_string(equilibria) + " equilibria, " +
              std::to_string(mismatches) + " mismatches, " + fmt("%.1f s", secs)};
}

// Shared by criteria 2 and 4: n = 15 over every model, cost and objective with
// exhaustive search, tuned UCT and GIL trained on tuned-UCT demonstrations.
struct Small {
  RunOutput out;
  double seconds = 0.0;
  int max_best_step = 0;
};

Small run_small(const fs::path& root) {
  ExperimentSpec s;
  s.sizes = {15};
  s.methods = {Method::kExhaustive, Method::kUct, Method::kGil};
  s.seeds = {0};
  s.counts = {1000, 100, 100};
  s.hyper_grids.gil_strategy = {TrainStrategy::kSeparate};
  s.gil_steps = kFidelityMaxSteps;
  s.output_dir = root / "n15";
  s.data_dir = root / "data";
  Clock clock;
  Small small;
  small.out = run_experiment(s, {progress});
  small.seconds = clock.seconds();
  for (const auto& r : small.out.test_records) {
    if (r.method != "gil") continue;
    const auto hp = nlohmann::json::parse(r.hyperparams_json);
    small.max_best_step = std::max(small.max_best_step, hp["best_step"].get<int>());
  }
  return small;
}

Outcome near_optimality(const Small& small) {
  const auto es = cell_means(small.out.test_records, "es", kNearOptimalInstances);
  const auto uct = cell_means(small.out.test_records, "uct", kNearOptimalInstances);
  bool pass = es.size() == 12 && small.seconds < kNearOptimalSeconds;
  double worst = 1e9;
  std::string worst_cell;
  for (const auto& [key, opt] : es) {
    const double ratio = uct.at(key) / opt;
    pass = pass && ratio >= kNearOptimalRatio;
    if (ratio < worst) worst = ratio, worst_cell = key;
  }
  return {pass, std::to_string(es.size()) + " settings, min UCT/ES " + fmt("%.4f", worst) + " (" + worst_cell +
                    "), run " + fmt("%.0f s", small.seconds)};
}

Outcome fidelity(const Small& small) {
  const auto uct = cell_means(small.out.test_records, "uct");
  const auto gil = cell_means(small.out.test_records, "gil");
  bool pass = gil.size() == 12 && small.seconds < kFidelitySeconds && small.max_best_step <= kFidelityMaxSteps;
  double worst = 1e9;
  std::string worst_cell;
  for (const auto& [key, value] : gil) {
    const double ratio = value / uct.at(key);
    pass = pass && ratio >= kFidelityRatio;
    if (ratio < worst) worst = ratio, worst_cell = key;
    progress("GIL/UCT " + key + " " + fmt("%.4f", ratio));
  }
  return {pass, std::to_string(gil.size()) + " settings, min GIL/UCT " + fmt("%.4f", worst) + " (" + worst_cell +
                    "), run " + fmt("%.0f s", small.seconds)};
}

// Reference n = 15 means (Random, BR, SA, UCT) for the heterogeneous-cost cells.
struct Reference {
  const char* cell;
  double random, br, sa, uct;
};
constexpr Reference kReference[] = {
    {"HC-BA-F", 0.757, 0.753, 0.825, 0.848},
    {"HC-BA-SW", 0.708, 0.702, 0.806, 0.827},
    {"HC-ER-F", 0.806, 0.807, 0.849, 0.895},
    {"HC-ER-SW", 0.782, 0.782, 0.836, 0.882},
};

ExperimentSpec ordering_spec(const fs::path& root) {
  ExperimentSpec s;
  s.models = {GraphModel::kBarabasiAlbert, GraphModel::kErdosRenyi};
  s.sizes = {15};
  s.cost_settings = {CostSetting::kHeterogeneous};
  s.methods = {Method::kRandom, Method::kBestResponse, Method::kAnnealing, Method::kUct};
  s.seeds = {0, 1, 2};
  s.counts = {10, 100, 100};
  s.graph.ba_attachment = 1;
  s.sa_identical_cost_proxy = true;
  s.output_dir = root / "ordering";
  s.data_dir = root / "data-ba1";
  return s;
}

Outcome ordering(const fs::path& root) {
  const auto spec = ordering_spec(root);
  const auto out = run_experiment(spec, {progress});
  const auto rnd = cell_means(out.test_records, "random");
  const auto br = cell_means(out.test_records, "br");
  const auto sa = cell_means(out.test_records, "sa");
  const auto uct = cell_means(out.test_records, "uct");
  bool pass = uct.size() == 4;
  double worst_dev = 0.0, min_gap = 1e9;
  for (const auto& ref : kReference) {
    const std::string key = ref.cell;
    const double u = uct.at(key), s = sa.at(key), b = br.at(key), r = rnd.at(key);
    pass = pass && u > s && s > b && u - r >= kOrderingMargin;
    min_gap = std::min(min_gap, u - r);
    for (auto [got, want] : {std::pair{r, ref.random}, {b, ref.br}, {s, ref.sa}, {u, ref.uct}}) {
      worst_dev = std::max(worst_dev, std::abs(got - want));
    }
    progress(key + " random " + fmt("%.3f", r) + " br " + fmt("%.3f", b) + " sa " + fmt("%.3f", s) + " uct " +
             fmt("%.3f", u));
  }
  pass = pass && worst_dev <= kReferenceTolerance;

  // Annealing without the cost proxy, for reference only.
  auto plain = spec;
  plain.methods = {Method::kAnnealing};
  plain.seeds = {0};
  plain.sa_identical_cost_proxy = false;
  plain.output_dir = root / "ordering-plain-sa";
  const auto plain_sa = cell_means(run_experiment(plain).test_records, "sa");
  for (const auto& [key, v] : plain_sa) progress(key + " sa without proxy " + fmt("%.3f", v));

  return {pass, "UCT > SA > BR in 4 cells, min UCT-Random " + fmt("%.3f", min_gap) + ", max |dev| from reference " +
                    fmt("%.3f", worst_dev)};
}

Outcome speed(const fs::path& root) {
  ExperimentSpec s;
  s.sizes = {15, 100};
  s.cost_settings = {CostSetting::kHeterogeneous};
  s.objectives = {Objective::kSocialWelfare};
  s.methods = {Method::kUct, Method::kGil};
  s.seeds = {0};
  s.counts = {300, 20, 5};
  s.tune_instances = 2;
  s.hyper_grids.uct_cp = {0.25};
  s.hyper_grids.gil_lr = {1e-3};
  s.hyper_grids.gil_rounds = {3};
  s.hyper_grids.gil_strategy = {TrainStrategy::kSeparate};
  s.gil_train_sizes = {15};
  s.output_dir = root / "speed";
  s.data_dir = root / "data";
  const auto out = run_experiment(s, {progress});
  double uct = 0.0, gil = 0.0;
  int nu = 0, ng = 0;
  for (const auto& r : out.test_records) {
    if (r.n != 100) continue;
    if (r.method == "uct") uct += r.wall_time_ms, ++nu;
    if (r.method == "gil") gil += r.wall_time_ms, ++ng;
  }
  if (nu == 0 || ng == 0) return {false, "no n=100 records"};
  uct /= nu;
  gil /= ng;
  const double ratio = uct / std::max(gil, 1e-9);
  return {ratio >= kSpeedRatio, "n=100 UCT " + fmt("%.1f ms", uct) + ", GIL " + fmt("%.3f ms", gil) + ", ratio " +
                                    fmt("%.0f", ratio)};
}

Outcome gradients() {
  double worst = 0.0;
  std::string worst_block;
  for (int f = 0; f < kGradFixtures; ++f) {
    GnnConfig cfg;
    cfg.rounds = 3 + f % 4;
    cfg.features = f % 2 == 0 ? FeatureSet::kMembership : FeatureSet::kMembershipCost;
    const auto batch = gradcheck_fixture(500 + f, cfg.features);
    const auto params = init_params(cfg, 900 + f);
    const auto errors = gradcheck(batch, params);
    for (std::size_t b = 0; b < GnnParams::kNumBlocks; ++b) {
      if (errors[b] > worst) worst = errors[b], worst_block = std::string(GnnParams::kBlockNames[b]);
    }
  }
  return {worst < kGradTolerance, std::to_string(kGradFixtures) + " fixtures, max relative error " +
                                      fmt("%.2e", worst) + (worst_block.empty() ? "" : " (" + worst_block + ")")};
}

Outcome invariants() {
  const int sizes[] = {1, 2, 5, 10, 15, 25, 50, 75, 100};
  Rng rng(303);
  int bad_episodes = 0;
  for (int e = 0; e < kFuzzEpisodes; ++e) {
    const int n = sizes[rng.uniform_index(std::size(sizes))];
    const auto inst = random_instance(rng.next(), n);
    MdpState s = init_state(inst);
    int steps = 0;
    while (!is_terminal(s) && steps <= n) {
      const auto actions = valid_actions(s);
      s = step(s, actions[rng.uniform_index(actions.size())], Objective::kSocialWelfare).state;
      ++steps;
    }
    const std::vector<int> members(s.independent_set().begin(), s.independent_set().end());
    if (!is_terminal(s) || !is_maximal_is(inst.graph, members) || !is_psne(inst, profile_from_set(n, members))) {
      ++bad_episodes;
    }
  }

  int bad_br = 0;
  for (int i = 0; i < kBrInstances; ++i) {
    const int n = 2 + static_cast<int>(rng.uniform_index(99));
    const auto inst = random_instance(rng.next(), n);
    const auto r = best_response(inst, Objective::kSocialWelfare, rng.next());
    if (r.sweeps > 10 * n || !is_psne(inst, r.profile)) ++bad_br;
  }

  int bad_sa = 0;
  for (int i = 0; i < kSaTraces; ++i) {
    const auto inst = random_instance(rng.next(), 10 + static_cast<int>(rng.uniform_index(41)));
    SaConfig cfg;
    cfg.seed = rng.next();
    cfg.trace = true;
    cfg.no_improve_limit = 1000;
    cfg.identical_cost_proxy = i % 2 == 1;
    const auto r = simulated_annealing(inst, i % 3 == 0 ? Objective::kFairness : Objective::kSocialWelfare, cfg);
    if (!std::is_sorted(r.best_trace.begin(), r.best_trace.end()) || r.best_trace.empty()) ++bad_sa;
  }
  return {bad_episodes == 0 && bad_br == 0 && bad_sa == 0,
          std::to_string(kFuzzEpisodes) + " episodes (" + std::to_string(bad_episodes) + " bad), " +
              std::to_string(kBrInstances) + " BR runs (" + std::to_string(bad_br) + " bad), " +
              std::to_string(kSaTraces) + " SA traces (" + std::to_string(bad_sa) + " bad)"};
}

// results.csv with the timing column blanked.
std::string value_columns(const fs::path& path) {
  auto records = read_results_csv(path);
  for (auto& r : records) r.wall_time_ms = 0.0;
  return records_to_csv(records);
}

Outcome reproducibility(const fs::path& root) {
  ExperimentSpec s;
  s.models = {GraphModel::kErdosRenyi, GraphModel::kBarabasiAlbert};
  s.sizes = {10};
  s.objectives = {Objective::kSocialWelfare};
  s.methods = {Method::kRandom, Method::kTargetHubs, Method::kTargetLowestCost, Method::kBestResponse,
               Method::kPayoffTransfer, Method::kAnnealing, Method::kUct, Method::kGil, Method::kExhaustive};
  s.seeds = {0, 1};
  s.counts = {20, 5, 5};
  s.hyper_grids.uct_cp = {0.1, 1.0};
  s.hyper_grids.sa_epsilon = {10.0};
  s.hyper_grids.gil_lr = {1e-3};
  s.hyper_grids.gil_rounds = {3};
  s.gil_steps = 40;
  s.gil_validate_every = 20;
  s.sa_no_improve_limit = 500;

  auto first = s;
  first.output_dir = root / "repro-a";
  auto second = s;
  second.output_dir = root / "repro-b";
  second.workers = 3;
  const auto a = run_experiment(first);
  run_experiment(second);
  const auto left = value_columns(first.output_dir / "results.csv");
  const auto right = value_columns(second.output_dir / "results.csv");
  return {left == right && !a.test_records.empty(),
          std::to_string(a.test_records.size()) + " records, " + (left == right ? "identical" : "different") +
              " value columns across two runs (1 and 3 workers)"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path keep;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--keep" && i + 1 < argc) {
      keep = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--keep DIR] [--only N,...]\n";
      return 2;
    }
  }
  unsetenv("PGG_DATA_DIR");
  TempDir scratch("acceptance");
  const fs::path root = keep.empty() ? scratch.path() : keep;
  fs::create_directories(root);

  const auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };
  std::map<int, Outcome> outcomes;
  const auto run = [&](int c, const std::function<Outcome()>& fn) {
    if (!wanted(c)) return;
    std::cerr << "criterion " << c << "\n";
    try {
      outcomes[c] = fn();
    } catch (const std::exception& e) {
      outcomes[c] = {false, std::string("error: ") + e.what()};
    }
    std::cerr << "  -> " << (outcomes[c].pass ? "PASS" : "FAIL") << "\n";
  };

  run(1, oracle_equivalence);
  if (wanted(2) || wanted(4)) {
    std::optional<Small> small;
    std::string error;
    try {
      std::cerr << "criteria 2 and 4: shared n=15 run\n";
      small = run_small(root);
    } catch (const std::exception& e) {
      error = std::string("error: ") + e.what();
    }
    run(2, [&] { return small ? near_optimality(*small) : Outcome{false, error}; });
    run(4, [&] { return small ? fidelity(*small) : Outcome{false, error}; });
  }
  run(3, [&] { return ordering(root); });
  run(5, [&] { return speed(root); });
  run(6, gradients);
  run(7, invariants);
  run(8, [&] { return reproducibility(root); });

  bool all = true;
  for (const auto& [c, o] : outcomes) {
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "\n";
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
