#include "pgg/graphgen.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "pgg/errors.hpp"
#include "pgg/rng.hpp"
#include "pgg/serialize.hpp"

namespace pgg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(GraphModel model) {
  switch (model) {
    case GraphModel::kErdosRenyi: return "ER";
    case GraphModel::kBarabasiAlbert: return "BA";
    case GraphModel::kWattsStrogatz: return "WS";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kEval: return "eval";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<GraphModel> parse_graph_model(std::string_view text) {
  if (text == "ER" || text == "er") return GraphModel::kErdosRenyi;
  if (text == "BA" || text == "ba") return GraphModel::kBarabasiAlbert;
  if (text == "WS" || text == "ws") return GraphModel::kWattsStrogatz;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "eval") return Split::kEval;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

long GraphModelConfig::er_edge_count() const {
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return std::lround(er_edge_fraction * pairs);
}

void GraphModelConfig::validate() const {
  if (n < 1) throw ConfigError("graph model: n must be positive");
  switch (model) {
    case GraphModel::kErdosRenyi: {
      const long pairs = static_cast<long>(n) * (n - 1) / 2;
      if (er_edge_fraction < 0.0 || er_edge_count() > pairs) {
        throw ConfigError("ER: edge count " + std::to_string(er_edge_count()) +
                          " exceeds " + std::to_string(pairs) + " vertex pairs");
      }
      break;
    }
    case GraphModel::kBarabasiAlbert:
      if (ba_attachment < 1 || ba_attachment >= n) {
        throw ConfigError("BA: need 1 <= M < n (M=" + std::to_string(ba_attachment) +
                          ", n=" + std::to_string(n) + ")");
      }
      break;
    case GraphModel::kWattsStrogatz:
      if (ws_neighbors % 2 != 0 || ws_neighbors < 0 || ws_neighbors >= n) {
        throw ConfigError("WS: k must be even and smaller than n");
      }
      if (ws_rewire_prob < 0.0 || ws_rewire_prob > 1.0) {
        throw ConfigError("WS: rewiring probability outside [0,1]");
      }
      break;
  }
}

Graph gen_er(const GraphModelConfig& cfg, std::uint64_t seed) {
  GraphModelConfig c = cfg;
  c.model = GraphModel::kErdosRenyi;
  c.validate();
  std::vector<Edge> pairs;
  for (int u = 0; u < c.n; ++u) {
    for (int v = u + 1; v < c.n; ++v) pairs.push_back({u, v});
  }
  const auto m = static_cast<std::size_t>(c.er_edge_count());
  Rng rng(seed);
  // Partial Fisher-Yates: the first m slots are a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(pairs[i], pairs[i + rng.uniform_index(pairs.size() - i)]);
  }
  pairs.resize(m);
  return Graph(c.n, pairs);
}

Graph gen_ba(const GraphModelConfig& cfg, std::uint64_t seed) {
  GraphModelConfig c = cfg;
  c.model = GraphModel::kBarabasiAlbert;
  c.validate();
  const int m = c.ba_attachment;
  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<int> targets(m);
  for (int i = 0; i < m; ++i) targets[i] = i;
  // Each vertex appears once per incident edge, so uniform draws from this
  // list are degree-proportional.
  std::vector<int> repeated;
  for (int source = m; source < c.n; ++source) {
    for (int t : targets) edges.push_back({t, source});
    repeated.insert(repeated.end(), targets.begin(), targets.end());
    repeated.insert(repeated.end(), static_cast<std::size_t>(m), source);
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < m) {
      chosen.insert(repeated[rng.uniform_index(repeated.size())]);
    }
    targets.assign(chosen.begin(), chosen.end());
  }
  return Graph(c.n, edges);
}

Graph gen_ws(const GraphModelConfig& cfg, std::uint64_t seed) {
  GraphModelConfig c = cfg;
  c.model = GraphModel::kWattsStrogatz;
  c.validate();
  const int n = c.n;
  const int half = c.ws_neighbors / 2;
  std::vector<std::set<int>> adj(n);
  auto link = [&](int u, int v) {
    adj[u].insert(v);
    adj[v].insert(u);
  };
  for (int j = 1; j <= half; ++j) {
    for (int u = 0; u < n; ++u) link(u, (u + j) % n);
  }
  Rng rng(seed);
  for (int j = 1; j <= half; ++j) {
    for (int u = 0; u < n; ++u) {
      if (rng.uniform01() >= c.ws_rewire_prob) continue;
      const int v = (u + j) % n;
      if (static_cast<int>(adj[u].size()) >= n - 1) continue;
      int w = static_cast<int>(rng.uniform_index(n));
      while (w == u || adj[u].count(w)) w = static_cast<int>(rng.uniform_index(n));
      adj[u].erase(v);
      adj[v].erase(u);
      link(u, w);
    }
  }
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v : adj[u]) {
      if (u < v) edges.push_back({u, v});
    }
  }
  return Graph(n, edges);
}

Graph generate_graph(const GraphModelConfig& cfg, std::uint64_t seed) {
  switch (cfg.model) {
    case GraphModel::kErdosRenyi: return gen_er(cfg, seed);
    case GraphModel::kBarabasiAlbert: return gen_ba(cfg, seed);
    case GraphModel::kWattsStrogatz: return gen_ws(cfg, seed);
  }
  throw ConfigError("unknown graph model");
}

std::vector<double> sample_costs(int n, CostSetting setting, std::uint64_t seed) {
  if (n < 0) throw ConfigError("sample_costs: negative n");
  std::vector<double> costs(n, 0.5);
  if (setting == CostSetting::kIdentical) return costs;
  Rng rng(seed);
  for (double& c : costs) {
    do {
      c = rng.uniform01();
    } while (c <= 0.0 || c >= 1.0);
  }
  return costs;
}

int SplitCounts::of(Split split) const {
  switch (split) {
    case Split::kTrain: return train;
    case Split::kEval: return eval;
    case Split::kTest: return test;
  }
  return 0;
}

std::string setting_name(const GraphModelConfig& cfg, CostSetting setting) {
  return std::string(to_string(cfg.model)) + "_" + std::to_string(cfg.n) + "_" +
         std::string(to_string(setting));
}

std::uint64_t instance_seed(std::uint64_t master_seed, const GraphModelConfig& cfg,
                            CostSetting setting, Split split, int index) {
  std::uint64_t s = mix_seed(master_seed, fnv1a64(setting_name(cfg, setting)));
  s = mix_seed(s, static_cast<std::uint64_t>(split) + 1);
  return mix_seed(s, static_cast<std::uint64_t>(index));
}

GameInstance make_instance(const GraphModelConfig& cfg, CostSetting setting, Split split,
                           int index, std::uint64_t master_seed) {
  const std::uint64_t seed = instance_seed(master_seed, cfg, setting, split, index);
  GameInstance inst;
  inst.graph = generate_graph(cfg, mix_seed(seed, 1));
  inst.costs = sample_costs(cfg.n, setting, mix_seed(seed, 2));
  inst.cost_setting = setting;
  char idx[16];
  std::snprintf(idx, sizeof idx, "%04d", index);
  inst.instance_id = setting_name(cfg, setting) + "/" + std::string(to_string(split)) + "/" + idx;
  return inst;
}

InstanceSet make_instance_set(const GraphModelConfig& cfg, CostSetting setting, Split split,
                              int count, std::uint64_t master_seed) {
  if (count < 1) throw ConfigError("instance set: count must be at least 1");
  cfg.validate();
  InstanceSet set{split, {}, master_seed, cfg, setting};
  set.instances.reserve(count);
  for (int i = 0; i < count; ++i) {
    set.instances.push_back(make_instance(cfg, setting, split, i, master_seed));
  }
  return set;
}

fs::path data_root(const fs::path& fallback) {
  if (const char* env = std::getenv("PGG_DATA_DIR"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return fallback;
}

std::string content_hash(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

namespace {

json config_json(const GraphModelConfig& cfg) {
  return json{{"model", std::string(to_string(cfg.model))},
              {"n", cfg.n},
              {"er_edge_fraction", cfg.er_edge_fraction},
              {"ba_attachment", cfg.ba_attachment},
              {"ws_neighbors", cfg.ws_neighbors},
              {"ws_rewire_prob", cfg.ws_rewire_prob}};
}

json counts_json(const SplitCounts& counts) {
  return json{{"train", counts.train}, {"eval", counts.eval}, {"test", counts.test}};
}

std::optional<json> read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) return std::nullopt;
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string split_bytes(const std::vector<GameInstance>& instances) {
  std::string text;
  for (const auto& inst : instances) {
    text += instance_to_json(inst).dump();
    text += '\n';
  }
  return text;
}

}  // namespace

fs::path ensure_dataset(const fs::path& root, const GraphModelConfig& cfg, CostSetting setting,
                        const SplitCounts& counts, std::uint64_t master_seed) {
  cfg.validate();
  const fs::path dir = root / setting_name(cfg, setting);
  if (auto manifest = read_manifest(dir)) {
    if ((*manifest)["master_seed"] == master_seed && (*manifest)["config"] == config_json(cfg) &&
        (*manifest)["counts"] == counts_json(counts)) {
      return dir;
    }
  }
  json hashes = json::object();
  std::string all;
  for (Split split : {Split::kTrain, Split::kEval, Split::kTest}) {
    const auto set = make_instance_set(cfg, setting, split, counts.of(split), master_seed);
    const std::string bytes = split_bytes(set.instances);
    write_text_file(dir / (std::string(to_string(split)) + ".jsonl"), bytes);
    const std::string h = content_hash(bytes);
    hashes[std::string(to_string(split))] = h;
    all += h;
  }
  json manifest{{"master_seed", master_seed},
                {"setting", setting_name(cfg, setting)},
                {"cost_setting", std::string(to_string(setting))},
                {"config", config_json(cfg)},
                {"counts", counts_json(counts)},
                {"split_hashes", hashes},
                {"content_hash", content_hash(all)},
                {"seed_derivation",
                 "mix(mix(mix(master, fnv1a(setting)), split+1), index); graph=mix(s,1), "
                 "costs=mix(s,2)"},
                {"cost_settings_share_graphs", false}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

InstanceSet load_split(const fs::path& root, const GraphModelConfig& cfg, CostSetting setting,
                       Split split) {
  const fs::path dir = root / setting_name(cfg, setting);
  auto manifest = read_manifest(dir);
  if (!manifest) throw IoError("missing dataset manifest in " + dir.string());
  const fs::path path = dir / (std::string(to_string(split)) + ".jsonl");
  const std::string bytes = read_text_file(path);
  const std::string expected =
      (*manifest)["split_hashes"].value(std::string(to_string(split)), std::string{});
  if (content_hash(bytes) != expected) {
    throw IoError(path.string() + ": content hash does not match manifest");
  }
  InstanceSet set;
  set.split = split;
  set.master_seed = (*manifest)["master_seed"].get<std::uint64_t>();
  set.model_config = cfg;
  set.cost_setting = setting;
  set.instances = read_instances_jsonl(path);
  return set;
}

std::string manifest_hash(const fs::path& setting_dir) {
  auto manifest = read_manifest(setting_dir);
  if (!manifest) return {};
  return manifest->value("content_hash", std::string{});
}

}  // namespace pgg
