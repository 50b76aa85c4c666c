// Command-line front end for dataset generation, planning, baselines, GIL
// training and experiment reporting.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgg/baselines.hpp"
#include "pgg/demonstration.hpp"
#include "pgg/errors.hpp"
#include "pgg/gil.hpp"
#include "pgg/graphgen.hpp"
#include "pgg/harness.hpp"
#include "pgg/serialize.hpp"
#include "pgg/uct.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using pgg::Objective;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string config;
};

Objective objective_from(const std::string& text) {
  auto o = pgg::parse_objective(text);
  if (!o) throw pgg::ConfigError("unknown objective '" + text + "' (expected sw or f)");
  return *o;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    pgg::write_text_file(g.out, text);
  }
}

json set_result(const std::vector<int>& members, double value) {
  return {{"independent_set", members}, {"value", value}};
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Equilibrium search for best-shot public goods games on networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { g.seed = s, g.seed_set = true; },
      "Random seed (master seed for generate/evaluate, tie-break seed for report)");
  app.add_option("--out", g.out, "Output file, or output directory for generate/evaluate");
  app.add_option("--config", g.config, "Experiment spec JSON (generate, evaluate)")
      ->check(CLI::ExistingFile);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate train/eval/test instance splits");
  std::string gen_model = "ER", gen_cost = "IC";
  int gen_n = 15;
  std::vector<int> gen_counts = {1000, 100, 100};
  gen->add_option("--model", gen_model, "Graph model: ER, BA or WS");
  gen->add_option("--n", gen_n, "Number of players");
  gen->add_option("--cost", gen_cost, "Cost setting: IC or HC");
  gen->add_option("--counts", gen_counts, "Train, eval and test instance counts")->expected(3);
  int gen_ba_m = 2;
  gen->add_option("--ba-attachment", gen_ba_m, "Edges added per new BA vertex");

  // plan
  auto* plan = app.add_subcommand("plan", "Plan one episode with UCT");
  std::string plan_instance, plan_objective = "sw", plan_demos;
  double plan_cp = 0.5;
  int plan_factor = 20;
  std::size_t plan_index = 0;
  plan->add_option("--instance", plan_instance, "Instance .json or .jsonl file")->required();
  plan->add_option("--index", plan_index, "Line of a .jsonl instance file");
  plan->add_option("--objective", plan_objective, "Objective: sw or f");
  plan->add_option("--cp", plan_cp, "Exploration constant");
  plan->add_option("--sims-factor", plan_factor, "Simulations per move are this times n");
  plan->add_option("--demos", plan_demos, "Also write the episode's demonstrations here (JSON lines)");

  // baseline
  auto* base = app.add_subcommand("baseline", "Run a baseline method on one instance");
  std::string base_method, base_instance, base_objective = "sw";
  double base_epsilon = 10.0;
  std::size_t base_index = 0;
  bool base_proxy = false;
  base->add_option("--method", base_method, "es, br, pt, sa, random, th or tlc")->required();
  base->add_option("--instance", base_instance, "Instance .json or .jsonl file")->required();
  base->add_option("--index", base_index, "Line of a .jsonl instance file");
  base->add_option("--objective", base_objective, "Objective: sw or f");
  base->add_option("--epsilon", base_epsilon, "Annealing rate for sa");
  base->add_flag("--identical-cost-proxy", base_proxy, "sa: score the search with all costs set to 1/2");

  // collect
  auto* collect = app.add_subcommand("collect", "Collect UCT demonstrations over an instance file");
  std::string col_instances, col_objective = "sw";
  double col_cp = 0.5;
  int col_factor = 20, col_limit = 0;
  collect->add_option("--instances", col_instances, "Instances (.jsonl)")->required();
  collect->add_option("--objective", col_objective, "Objective: sw or f");
  collect->add_option("--cp", col_cp, "Exploration constant");
  collect->add_option("--sims-factor", col_factor, "Simulations per move are this times n");
  collect->add_option("--limit", col_limit, "Use only the first N instances (0 = all)");

  // train
  auto* trn = app.add_subcommand("train", "Train a GIL policy on demonstrations");
  std::vector<std::string> trn_demos;
  std::string trn_validation, trn_objective = "sw", trn_strategy = "separate", trn_features = "membership";
  double trn_lr = 1e-3;
  int trn_k = 3, trn_target = 15, trn_steps = 2000, trn_batch = 5, trn_every = 50;
  trn->add_option("--demos", trn_demos, "Demonstration files; sizes are read from the data")->required();
  trn->add_option("--validation", trn_validation, "Validation instances (.jsonl) at the target size")
      ->required();
  trn->add_option("--objective", trn_objective, "Objective: sw or f");
  trn->add_option("--strategy", trn_strategy, "separate, mixed or curriculum");
  trn->add_option("--lr", trn_lr, "Adam learning rate");
  trn->add_option("--K", trn_k, "Embedding rounds (3..6)");
  trn->add_option("--target-n", trn_target, "Target graph size");
  trn->add_option("--steps", trn_steps, "Optimizer steps");
  trn->add_option("--batch", trn_batch, "Batch size");
  trn->add_option("--validate-every", trn_every, "Steps between validations");
  trn->add_option("--features", trn_features, "membership or membership_cost");

  // rollout
  auto* roll = app.add_subcommand("rollout", "Greedy GIL rollout on one instance");
  std::string roll_model, roll_instance, roll_objective = "sw";
  std::size_t roll_index = 0;
  roll->add_option("--model", roll_model, "Model file written by train")->required();
  roll->add_option("--instance", roll_instance, "Instance .json or .jsonl file")->required();
  roll->add_option("--index", roll_index, "Line of a .jsonl instance file");
  roll->add_option("--objective", roll_objective, "Objective: sw or f");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Run an experiment spec and write results.csv");
  bool eval_quiet = false;
  eval->add_flag("--quiet", eval_quiet, "Suppress progress lines");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate a results CSV");
  std::string rep_in, rep_kind = "mean-rewards";
  rep->add_option("--in", rep_in, "results.csv")->required()->check(CLI::ExistingFile);
  rep->add_option("--kind", rep_kind,
                  "mean-rewards, mean-rewards-by-setting, win-rates or timings")
      ->check(CLI::IsMember({"mean-rewards", "mean-rewards-by-setting", "win-rates", "timings"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "pgg: " << e.what() << "\n";
    return 2;
  }

  if (*gen) {
    pgg::ExperimentSpec spec;
    if (!g.config.empty()) spec = pgg::load_spec(g.config);
    const std::uint64_t master = g.seed_set ? g.seed : spec.master_seed;
    const fs::path root = pgg::data_root(g.out.empty() ? spec.resolved_data_dir() : fs::path(g.out));
    std::vector<std::pair<pgg::GraphModelConfig, pgg::CostSetting>> settings;
    if (!g.config.empty()) {
      for (auto m : spec.models) {
        for (int n : spec.sizes) {
          for (auto c : spec.cost_settings) {
            pgg::GraphModelConfig cfg = spec.graph;
            cfg.model = m;
            cfg.n = n;
            settings.emplace_back(cfg, c);
          }
        }
      }
    } else {
      auto m = pgg::parse_graph_model(gen_model);
      auto c = pgg::parse_cost_setting(gen_cost);
      if (!m) throw pgg::ConfigError("unknown graph model '" + gen_model + "'");
      if (!c) throw pgg::ConfigError("unknown cost setting '" + gen_cost + "'");
      pgg::GraphModelConfig cfg;
      cfg.model = *m;
      cfg.n = gen_n;
      cfg.ba_attachment = gen_ba_m;
      spec.counts = {gen_counts[0], gen_counts[1], gen_counts[2]};
      settings.emplace_back(cfg, *c);
    }
    for (const auto& [cfg, cost] : settings) {
      const fs::path dir = pgg::ensure_dataset(root, cfg, cost, spec.counts, master);
      std::cout << dir.string() << " " << pgg::manifest_hash(dir) << "\n";
    }
    return 0;
  }

  if (*plan) {
    const auto inst = pgg::read_instance_file(plan_instance, plan_index);
    pgg::UctConfig c;
    c.cp = plan_cp;
    c.sims_per_move_factor = plan_factor;
    c.seed = g.seed;
    const auto r = pgg::plan_episode(inst, c, objective_from(plan_objective), !plan_demos.empty());
    if (!plan_demos.empty()) pgg::write_demonstrations(plan_demos, r.demonstrations);
    emit(g, set_result(r.independent_set, r.value).dump() + "\n");
    return 0;
  }

  if (*base) {
    const auto inst = pgg::read_instance_file(base_instance, base_index);
    const Objective obj = objective_from(base_objective);
    const auto method = pgg::parse_method(base_method);
    pgg::ActionProfile profile;
    double value = 0.0;
    switch (method.value_or(pgg::Method::kUct)) {
      case pgg::Method::kExhaustive: {
        auto r = pgg::exhaustive_search(inst, obj);
        profile = r.profile, value = r.value;
        break;
      }
      case pgg::Method::kBestResponse: {
        auto r = pgg::best_response(inst, obj, g.seed);
        profile = r.profile, value = r.value;
        break;
      }
      case pgg::Method::kPayoffTransfer: {
        auto r = pgg::payoff_transfer(inst, obj, g.seed);
        profile = r.profile, value = r.value;
        break;
      }
      case pgg::Method::kAnnealing: {
        pgg::SaConfig c;
        c.epsilon = base_epsilon;
        c.seed = g.seed;
        c.identical_cost_proxy = base_proxy;
        auto r = pgg::simulated_annealing(inst, obj, c);
        profile = r.profile, value = r.value;
        break;
      }
      case pgg::Method::kRandom: {
        auto r = pgg::random_mis(inst, obj, g.seed);
        profile = r.profile, value = r.value;
        break;
      }
      case pgg::Method::kTargetHubs: {
        auto r = pgg::target_hubs(inst, obj);
        profile = r.profile, value = r.value;
        break;
      }
      case pgg::Method::kTargetLowestCost: {
        auto r = pgg::target_lowest_cost(inst, obj);
        profile = r.profile, value = r.value;
        break;
      }
      default:
        throw pgg::ConfigError("unknown baseline '" + base_method +
                               "' (expected es, br, pt, sa, random, th or tlc)");
    }
    json out = set_result(profile.contributors(), value);
    out["method"] = base_method;
    emit(g, out.dump() + "\n");
    return 0;
  }

  if (*collect) {
    if (g.out.empty()) throw pgg::ConfigError("collect needs --out");
    auto instances = pgg::read_instances_jsonl(col_instances);
    if (col_limit > 0 && static_cast<int>(instances.size()) > col_limit) instances.resize(col_limit);
    const Objective obj = objective_from(col_objective);
    std::vector<pgg::Demonstration> all;
    for (const auto& inst : instances) {
      pgg::UctConfig c;
      c.cp = col_cp;
      c.sims_per_move_factor = col_factor;
      c.seed = pgg::mix_seed(g.seed, pgg::fnv1a64(inst.instance_id));
      auto r = pgg::plan_episode(inst, c, obj, true);
      all.insert(all.end(), r.demonstrations.begin(), r.demonstrations.end());
    }
    pgg::write_demonstrations(g.out, all);
    std::cout << all.size() << " demonstrations\n";
    return 0;
  }

  if (*trn) {
    if (g.out.empty()) throw pgg::ConfigError("train needs --out");
    pgg::DemonstrationSets sets;
    for (const auto& path : trn_demos) {
      for (auto& d : pgg::read_demonstrations(path)) sets[d.num_players()].push_back(std::move(d));
    }
    pgg::TrainConfig c;
    c.learning_rate = trn_lr;
    c.batch_size = trn_batch;
    c.total_steps = trn_steps;
    c.validate_every = trn_every;
    auto strategy = pgg::parse_train_strategy(trn_strategy);
    if (!strategy) throw pgg::ConfigError("unknown strategy '" + trn_strategy + "'");
    c.strategy = *strategy;
    c.target_n = trn_target;
    c.seed = g.seed;
    c.objective = objective_from(trn_objective);
    c.gnn.rounds = trn_k;
    auto features = pgg::parse_feature_set(trn_features);
    if (!features) throw pgg::ConfigError("unknown feature set '" + trn_features + "'");
    c.gnn.features = *features;
    const auto validation = pgg::read_instances_jsonl(trn_validation);
    const auto r = pgg::train(sets, c, validation);
    pgg::save_model(g.out, r.best);
    std::cout << json{{"best_step", r.best_step}, {"best_score", r.best_score}}.dump() << "\n";
    return 0;
  }

  if (*roll) {
    const auto params = pgg::load_model(roll_model);
    const auto inst = pgg::read_instance_file(roll_instance, roll_index);
    const auto r = pgg::greedy_rollout(inst, params, objective_from(roll_objective));
    emit(g, set_result(r.independent_set, r.value).dump() + "\n");
    return 0;
  }

  if (*eval) {
    if (g.config.empty()) throw pgg::ConfigError("evaluate needs --config");
    auto spec = pgg::load_spec(g.config);
    if (!g.out.empty()) spec.output_dir = g.out;
    if (g.seed_set) spec.master_seed = g.seed;
    pgg::RunOptions options;
    if (!eval_quiet) options.log = [](const std::string& line) { std::cerr << line << "\n"; };
    const auto r = pgg::run_experiment(spec, options);
    std::cout << (spec.output_dir / "results.csv").string() << ": " << r.test_records.size()
              << " records (" << r.groups_computed << " groups computed, " << r.groups_resumed
              << " resumed)\n";
    return 0;
  }

  if (*rep) {
    const auto records = pgg::read_results_csv(rep_in);
    pgg::Table t;
    if (rep_kind == "mean-rewards") {
      t = pgg::mean_reward_table(records);
    } else if (rep_kind == "mean-rewards-by-setting") {
      t = pgg::mean_reward_table_by_setting(records);
    } else if (rep_kind == "win-rates") {
      t = pgg::win_rate_table(records, g.seed);
    } else {
      t = pgg::timing_report(records);
    }
    emit(g, t.to_csv());
    return 0;
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "pgg: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pgg: " << e.what() << "\n";
    return 1;
  }
}
