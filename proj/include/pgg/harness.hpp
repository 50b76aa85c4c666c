#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pgg/baselines.hpp"
#include "pgg/game.hpp"
#include "pgg/gil.hpp"
#include "pgg/graphgen.hpp"
#include "pgg/uct.hpp"

namespace pgg {

enum class Method {
  kExhaustive,
  kBestResponse,
  kPayoffTransfer,
  kAnnealing,
  kRandom,
  kTargetHubs,
  kTargetLowestCost,
  kUct,
  kGil,
};

/// "es", "br", "pt", "sa", "random", "th", "tlc", "uct", "gil".
std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view text);

/// Whether the method is defined for the setting (ES needs n <= 20, TLC needs HC).
bool method_applies(Method method, int n, CostSetting setting);

/// Cost-feature choice for GIL: fixed, or one-hot for IC and one-hot plus cost for HC.
enum class GilFeatures { kAuto, kMembership, kMembershipCost };
FeatureSet resolve_features(GilFeatures choice, CostSetting setting);

struct HyperGrids {
  std::vector<double> uct_cp = kCpGrid;
  std::vector<double> sa_epsilon = kEpsilonGrid;
  std::vector<double> gil_lr = kLearningRateGrid;
  std::vector<int> gil_rounds = kRoundsGrid;
  std::vector<TrainStrategy> gil_strategy = {TrainStrategy::kSeparate, TrainStrategy::kMixed,
                                             TrainStrategy::kCurriculum};
};

struct ExperimentSpec {
  std::vector<GraphModel> models = {GraphModel::kErdosRenyi, GraphModel::kBarabasiAlbert,
                                    GraphModel::kWattsStrogatz};
  std::vector<int> sizes = {15, 25, 50, 75, 100};
  std::vector<CostSetting> cost_settings = {CostSetting::kIdentical,
                                            CostSetting::kHeterogeneous};
  std::vector<Objective> objectives = {Objective::kSocialWelfare, Objective::kFairness};
  std::vector<Method> methods = {Method::kRandom,  Method::kTargetHubs, Method::kTargetLowestCost,
                                 Method::kBestResponse, Method::kPayoffTransfer,
                                 Method::kAnnealing, Method::kUct, Method::kGil,
                                 Method::kExhaustive};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  HyperGrids hyper_grids;
  std::filesystem::path output_dir = "results";
  /// Dataset root; empty means <output_dir>/data. PGG_DATA_DIR takes precedence.
  std::filesystem::path data_dir;
  std::uint64_t master_seed = 20210;
  /// Instances generated per split.
  SplitCounts counts{1000, 100, 100};
  /// Instances used from each split (0 = all): eval for tuning, test for reporting,
  /// train for demonstration collection.
  int tune_instances = 0;
  int test_instances = 0;
  int demo_instances = 0;
  /// Graph-model parameters other than the model tag and n.
  GraphModelConfig graph;
  int uct_sims_factor = 20;
  long sa_no_improve_limit = 10'000;
  long sa_step_cutoff = 10'000'000;
  bool sa_identical_cost_proxy = false;
  int gil_steps = 2000;
  int gil_batch_size = 5;
  int gil_validate_every = 50;
  GilFeatures gil_features = GilFeatures::kAuto;
  /// GIL models are trained at these sizes; larger sizes reuse the model of the
  /// largest trained size below them. Empty means every size in `sizes`.
  std::vector<int> gil_train_sizes;
  /// Parallel workers for per-instance evaluation; 0 = hardware concurrency.
  int workers = 1;

  /// Throws ConfigError on empty selections, repeated seeds or bad sizes.
  void validate() const;
  std::filesystem::path resolved_data_dir() const;
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::filesystem::path& path);

struct ResultRecord {
  std::string method;
  std::string model;
  int n = 0;
  std::string cost_setting;
  std::string objective;
  std::uint64_t seed = 0;
  std::string instance_id;
  double value = 0.0;
  double wall_time_ms = 0.0;
  std::string hyperparams_json = "{}";
};

inline constexpr std::string_view kResultsHeader =
    "method,model,n,cost_setting,objective,seed,instance_id,value,wall_time_ms,hyperparams_json";

std::string format_record(const ResultRecord& r);
std::string records_to_csv(const std::vector<ResultRecord>& records);
std::vector<ResultRecord> records_from_csv(std::string_view text);
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path);

struct RunOptions {
  /// Progress lines; null for silence.
  std::function<void(const std::string&)> log;
};

struct RunOutput {
  std::vector<ResultRecord> test_records;
  std::vector<ResultRecord> tuning_records;
  int groups_computed = 0;
  int groups_resumed = 0;
};

/// Tunes every method on the eval split and evaluates it on the test split for
/// each (method, model, n, cost, objective, seed). Writes results.csv,
/// tuning.csv and manifest.json under spec.output_dir. Finished groups are
/// stored under parts/ with a completion marker and reused on the next run.
RunOutput run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

/// Throws ContractError unless every test record comes from a test split and
/// every tuning record from an eval split.
void check_split_separation(const std::vector<ResultRecord>& test_records,
                            const std::vector<ResultRecord>& tuning_records);

/// Plain string table that renders to CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

/// Per cell (cost, model, objective, n): mean over instances per seed, then mean
/// and standard deviation over seeds. One mean/std column pair per method in
/// order of first appearance.
Table mean_reward_table(const std::vector<ResultRecord>& records);
/// Same, with each seed's per-n means averaged over n before the seed statistics.
Table mean_reward_table_by_setting(const std::vector<ResultRecord>& records);
/// Win percentage per method per (cost, model, objective, n); the unit is a
/// (seed, instance) pair and exact ties are broken by a seeded uniform draw.
Table win_rate_table(const std::vector<ResultRecord>& records, std::uint64_t tie_seed = 0);
/// Mean episode milliseconds per (method, n).
Table timing_report(const std::vector<ResultRecord>& records);

/// Sample standard deviation; 0 for fewer than two values.
double sample_stddev(const std::vector<double>& values);

}  // namespace pgg
