#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgg/game.hpp"
#include "pgg/graph.hpp"

namespace pgg {

enum class GraphModel { kErdosRenyi, kBarabasiAlbert, kWattsStrogatz };
enum class Split { kTrain, kEval, kTest };

std::string_view to_string(GraphModel model);  // "ER" / "BA" / "WS"
std::string_view to_string(Split split);       // "train" / "eval" / "test"
std::optional<GraphModel> parse_graph_model(std::string_view text);
std::optional<Split> parse_split(std::string_view text);

struct GraphModelConfig {
  GraphModel model = GraphModel::kErdosRenyi;
  int n = 15;
  double er_edge_fraction = 0.20;
  int ba_attachment = 2;
  int ws_neighbors = 2;
  double ws_rewire_prob = 0.1;

  /// round(er_edge_fraction * n(n-1)/2).
  long er_edge_count() const;
  /// Throws ConfigError when the selected model cannot be built with these values.
  void validate() const;
};

/// Uniform graph with exactly er_edge_count() edges.
Graph gen_er(const GraphModelConfig& cfg, std::uint64_t seed);
/// Preferential attachment from M isolated seed vertices; (n-M)*M edges.
Graph gen_ba(const GraphModelConfig& cfg, std::uint64_t seed);
/// Ring lattice with far-endpoint rewiring; n*k/2 edges.
Graph gen_ws(const GraphModelConfig& cfg, std::uint64_t seed);
Graph generate_graph(const GraphModelConfig& cfg, std::uint64_t seed);

/// IC: all 1/2. HC: i.i.d. uniform on the open unit interval.
std::vector<double> sample_costs(int n, CostSetting setting, std::uint64_t seed);

struct InstanceSet {
  Split split = Split::kTrain;
  std::vector<GameInstance> instances;
  std::uint64_t master_seed = 0;
  GraphModelConfig model_config;
  CostSetting cost_setting = CostSetting::kIdentical;
};

struct SplitCounts {
  int train = 1000;
  int eval = 100;
  int test = 100;
  int of(Split split) const;
};

/// "<model>_<n>_<cost>", e.g. "BA_15_HC".
std::string setting_name(const GraphModelConfig& cfg, CostSetting setting);

/// Seed of one instance: mixes master seed, setting name, split and index.
std::uint64_t instance_seed(std::uint64_t master_seed, const GraphModelConfig& cfg,
                            CostSetting setting, Split split, int index);

GameInstance make_instance(const GraphModelConfig& cfg, CostSetting setting, Split split,
                           int index, std::uint64_t master_seed);
InstanceSet make_instance_set(const GraphModelConfig& cfg, CostSetting setting, Split split,
                              int count, std::uint64_t master_seed);

/// Dataset root: $PGG_DATA_DIR if set, else `fallback`.
std::filesystem::path data_root(const std::filesystem::path& fallback);

/// Generates `<root>/<setting>/{train,eval,test}.jsonl` plus manifest.json unless a
/// manifest with the same seed, config and counts already exists. Returns the
/// setting directory.
std::filesystem::path ensure_dataset(const std::filesystem::path& root,
                                     const GraphModelConfig& cfg, CostSetting setting,
                                     const SplitCounts& counts, std::uint64_t master_seed);

/// Loads one split and checks it against the manifest's content hash.
InstanceSet load_split(const std::filesystem::path& root, const GraphModelConfig& cfg,
                       CostSetting setting, Split split);

/// Hash recorded in the manifest for a setting directory ("" if absent).
std::string manifest_hash(const std::filesystem::path& setting_dir);

/// Hex FNV-1a of a byte string.
std::string content_hash(std::string_view bytes);

}  // namespace pgg
