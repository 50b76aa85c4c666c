#include "pgg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>
#include <tuple>
#include <utility>

#include "pgg/errors.hpp"
#include "pgg/rng.hpp"
#include "pgg/serialize.hpp"

#ifndef PGG_VERSION
#define PGG_VERSION "dev"
#endif

namespace pgg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 9> kMethodNames = {{
    {Method::kExhaustive, "es"},
    {Method::kBestResponse, "br"},
    {Method::kPayoffTransfer, "pt"},
    {Method::kAnnealing, "sa"},
    {Method::kRandom, "random"},
    {Method::kTargetHubs, "th"},
    {Method::kTargetLowestCost, "tlc"},
    {Method::kUct, "uct"},
    {Method::kGil, "gil"},
}};

std::string fmt(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

// Shortest text that reads back as the same double.
std::string exact(double x) { return fmt("%.17g", x); }

template <typename T, typename F>
std::vector<T> parse_list(const json& j, const char* key, F parse) {
  std::vector<T> out;
  for (const auto& item : j) {
    auto v = parse(item.get<std::string>());
    if (!v) throw ConfigError(std::string("spec: bad entry '") + item.get<std::string>() + "' in " + key);
    out.push_back(*v);
  }
  return out;
}

template <typename T>
std::vector<std::string> names_of(const std::vector<T>& values) {
  std::vector<std::string> out;
  for (const auto& v : values) out.emplace_back(to_string(v));
  return out;
}

std::optional<GilFeatures> parse_gil_features(std::string_view text) {
  if (text == "auto") return GilFeatures::kAuto;
  if (text == "membership") return GilFeatures::kMembership;
  if (text == "membership_cost") return GilFeatures::kMembershipCost;
  return std::nullopt;
}

std::string_view gil_features_name(GilFeatures f) {
  switch (f) {
    case GilFeatures::kAuto: return "auto";
    case GilFeatures::kMembership: return "membership";
    case GilFeatures::kMembershipCost: return "membership_cost";
  }
  return "?";
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Each call writes
// only its own slot, so results do not depend on scheduling.
template <typename F>
void parallel_for(int count, int workers, F fn) {
  if (workers == 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t instance_task_seed(std::uint64_t seed, const std::string& instance_id) {
  return mix_seed(seed, fnv1a64(instance_id));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw InputError("csv: unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view text) {
  for (const auto& [m, name] : kMethodNames) {
    if (name == text) return m;
  }
  return std::nullopt;
}

bool method_applies(Method method, int n, CostSetting setting) {
  if (method == Method::kExhaustive) return n <= kExhaustiveMaxPlayers;
  if (method == Method::kTargetLowestCost) return setting == CostSetting::kHeterogeneous;
  return true;
}

FeatureSet resolve_features(GilFeatures choice, CostSetting setting) {
  switch (choice) {
    case GilFeatures::kMembership: return FeatureSet::kMembership;
    case GilFeatures::kMembershipCost: return FeatureSet::kMembershipCost;
    case GilFeatures::kAuto: break;
  }
  return setting == CostSetting::kHeterogeneous ? FeatureSet::kMembershipCost
                                                : FeatureSet::kMembership;
}

void ExperimentSpec::validate() const {
  if (models.empty() || sizes.empty() || cost_settings.empty() || objectives.empty() ||
      methods.empty() || seeds.empty()) {
    throw ConfigError("spec: models, sizes, cost_settings, objectives, methods and seeds must be nonempty");
  }
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw ConfigError("spec: seeds must be distinct");
  for (int n : sizes) {
    if (n < 2) throw ConfigError("spec: sizes must be at least 2");
  }
  if (std::set<int>(sizes.begin(), sizes.end()).size() != sizes.size()) {
    throw ConfigError("spec: sizes must be distinct");
  }
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) {
    throw ConfigError("spec: methods must be distinct");
  }
  const auto uses = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  if ((uses(Method::kUct) || uses(Method::kGil)) && hyper_grids.uct_cp.empty()) {
    throw ConfigError("spec: uct cp grid is empty");
  }
  if (uses(Method::kAnnealing) && hyper_grids.sa_epsilon.empty()) {
    throw ConfigError("spec: sa epsilon grid is empty");
  }
  if (uses(Method::kGil) && (hyper_grids.gil_lr.empty() || hyper_grids.gil_rounds.empty() ||
                             hyper_grids.gil_strategy.empty())) {
    throw ConfigError("spec: gil grids must be nonempty");
  }
  for (int k : hyper_grids.gil_rounds) {
    GnnConfig g;
    g.rounds = k;
    g.validate();
  }
  if (counts.train < 1 || counts.eval < 1 || counts.test < 1) {
    throw ConfigError("spec: split counts must be positive");
  }
  if (tune_instances < 0 || test_instances < 0 || demo_instances < 0) {
    throw ConfigError("spec: instance limits must be non-negative");
  }
  if (uct_sims_factor < 1 || gil_steps < 1 || gil_batch_size < 1 || gil_validate_every < 1 ||
      sa_no_improve_limit < 1 || sa_step_cutoff < 1 || workers < 0) {
    throw ConfigError("spec: budgets must be positive");
  }
  for (GraphModel m : models) {
    for (int n : sizes) {
      GraphModelConfig cfg = graph;
      cfg.model = m;
      cfg.n = n;
      cfg.validate();
    }
  }
}

fs::path ExperimentSpec::resolved_data_dir() const {
  return data_root(data_dir.empty() ? output_dir / "data" : data_dir);
}

json spec_to_json(const ExperimentSpec& s) {
  return {
      {"models", names_of(s.models)},
      {"sizes", s.sizes},
      {"cost_settings", names_of(s.cost_settings)},
      {"objectives", names_of(s.objectives)},
      {"methods", names_of(s.methods)},
      {"seeds", s.seeds},
      {"hyper_grids",
       {{"uct_cp", s.hyper_grids.uct_cp},
        {"sa_epsilon", s.hyper_grids.sa_epsilon},
        {"gil_lr", s.hyper_grids.gil_lr},
        {"gil_rounds", s.hyper_grids.gil_rounds},
        {"gil_strategy", names_of(s.hyper_grids.gil_strategy)}}},
      {"output_dir", s.output_dir.string()},
      {"data_dir", s.data_dir.string()},
      {"master_seed", s.master_seed},
      {"counts", {{"train", s.counts.train}, {"eval", s.counts.eval}, {"test", s.counts.test}}},
      {"tune_instances", s.tune_instances},
      {"test_instances", s.test_instances},
      {"demo_instances", s.demo_instances},
      {"graph",
       {{"er_edge_fraction", s.graph.er_edge_fraction},
        {"ba_attachment", s.graph.ba_attachment},
        {"ws_neighbors", s.graph.ws_neighbors},
        {"ws_rewire_prob", s.graph.ws_rewire_prob}}},
      {"uct_sims_factor", s.uct_sims_factor},
      {"sa_no_improve_limit", s.sa_no_improve_limit},
      {"sa_step_cutoff", s.sa_step_cutoff},
      {"sa_identical_cost_proxy", s.sa_identical_cost_proxy},
      {"gil_steps", s.gil_steps},
      {"gil_batch_size", s.gil_batch_size},
      {"gil_validate_every", s.gil_validate_every},
      {"gil_features", std::string(gil_features_name(s.gil_features))},
      {"gil_train_sizes", s.gil_train_sizes},
      {"workers", s.workers},
  };
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("spec: expected a JSON object");
  static const std::set<std::string> known = {
      "models", "sizes", "cost_settings", "objectives", "methods", "seeds", "hyper_grids",
      "output_dir", "data_dir", "master_seed", "counts", "tune_instances", "test_instances",
      "demo_instances", "graph", "uct_sims_factor", "sa_no_improve_limit", "sa_step_cutoff",
      "sa_identical_cost_proxy", "gil_steps", "gil_batch_size", "gil_validate_every",
      "gil_features", "gil_train_sizes", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("spec: unknown key '" + key + "'");
  }
  ExperimentSpec s;
  try {
    if (j.contains("models")) s.models = parse_list<GraphModel>(j["models"], "models", parse_graph_model);
    if (j.contains("sizes")) s.sizes = j["sizes"].get<std::vector<int>>();
    if (j.contains("cost_settings")) {
      s.cost_settings = parse_list<CostSetting>(j["cost_settings"], "cost_settings", parse_cost_setting);
    }
    if (j.contains("objectives")) {
      s.objectives = parse_list<Objective>(j["objectives"], "objectives", parse_objective);
    }
    if (j.contains("methods")) s.methods = parse_list<Method>(j["methods"], "methods", parse_method);
    if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("hyper_grids")) {
      const json& h = j["hyper_grids"];
      for (const auto& [key, _] : h.items()) {
        if (key != "uct_cp" && key != "sa_epsilon" && key != "gil_lr" && key != "gil_rounds" &&
            key != "gil_strategy") {
          throw ConfigError("spec: unknown hyper grid '" + key + "'");
        }
      }
      if (h.contains("uct_cp")) s.hyper_grids.uct_cp = h["uct_cp"].get<std::vector<double>>();
      if (h.contains("sa_epsilon")) s.hyper_grids.sa_epsilon = h["sa_epsilon"].get<std::vector<double>>();
      if (h.contains("gil_lr")) s.hyper_grids.gil_lr = h["gil_lr"].get<std::vector<double>>();
      if (h.contains("gil_rounds")) s.hyper_grids.gil_rounds = h["gil_rounds"].get<std::vector<int>>();
      if (h.contains("gil_strategy")) {
        s.hyper_grids.gil_strategy =
            parse_list<TrainStrategy>(h["gil_strategy"], "gil_strategy", parse_train_strategy);
      }
    }
    if (j.contains("output_dir")) s.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("data_dir")) s.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("master_seed")) s.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("counts")) {
      const json& c = j["counts"];
      s.counts.train = c.value("train", s.counts.train);
      s.counts.eval = c.value("eval", s.counts.eval);
      s.counts.test = c.value("test", s.counts.test);
    }
    s.tune_instances = j.value("tune_instances", s.tune_instances);
    s.test_instances = j.value("test_instances", s.test_instances);
    s.demo_instances = j.value("demo_instances", s.demo_instances);
    if (j.contains("graph")) {
      const json& g = j["graph"];
      s.graph.er_edge_fraction = g.value("er_edge_fraction", s.graph.er_edge_fraction);
      s.graph.ba_attachment = g.value("ba_attachment", s.graph.ba_attachment);
      s.graph.ws_neighbors = g.value("ws_neighbors", s.graph.ws_neighbors);
      s.graph.ws_rewire_prob = g.value("ws_rewire_prob", s.graph.ws_rewire_prob);
    }
    s.uct_sims_factor = j.value("uct_sims_factor", s.uct_sims_factor);
    s.sa_no_improve_limit = j.value("sa_no_improve_limit", s.sa_no_improve_limit);
    s.sa_step_cutoff = j.value("sa_step_cutoff", s.sa_step_cutoff);
    s.sa_identical_cost_proxy = j.value("sa_identical_cost_proxy", s.sa_identical_cost_proxy);
    s.gil_steps = j.value("gil_steps", s.gil_steps);
    s.gil_batch_size = j.value("gil_batch_size", s.gil_batch_size);
    s.gil_validate_every = j.value("gil_validate_every", s.gil_validate_every);
    if (j.contains("gil_features")) {
      auto f = parse_gil_features(j["gil_features"].get<std::string>());
      if (!f) throw ConfigError("spec: gil_features must be auto, membership or membership_cost");
      s.gil_features = *f;
    }
    if (j.contains("gil_train_sizes")) s.gil_train_sizes = j["gil_train_sizes"].get<std::vector<int>>();
    s.workers = j.value("workers", s.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSpec load_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return spec_from_json(j);
}

// ---------------------------------------------------------------------------
// Records and CSV

std::string format_record(const ResultRecord& r) {
  std::string line;
  line += csv_field(r.method) + ',' + csv_field(r.model) + ',' + std::to_string(r.n) + ',';
  line += csv_field(r.cost_setting) + ',' + csv_field(r.objective) + ',' + std::to_string(r.seed) + ',';
  line += csv_field(r.instance_id) + ',' + exact(r.value) + ',' + fmt("%.3f", r.wall_time_ms) + ',';
  line += csv_field(r.hyperparams_json);
  return line;
}

std::string records_to_csv(const std::vector<ResultRecord>& records) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : records) out += format_record(r) + '\n';
  return out;
}

std::vector<ResultRecord> records_from_csv(std::string_view text) {
  std::vector<ResultRecord> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kResultsHeader) throw InputError("results csv: unexpected header");
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 10) {
      throw InputError("results csv line " + std::to_string(line_no) + ": expected 10 fields");
    }
    try {
      ResultRecord r;
      r.method = f[0];
      r.model = f[1];
      r.n = std::stoi(f[2]);
      r.cost_setting = f[3];
      r.objective = f[4];
      r.seed = std::stoull(f[5]);
      r.instance_id = f[6];
      r.value = std::stod(f[7]);
      r.wall_time_ms = std::stod(f[8]);
      r.hyperparams_json = f[9];
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InputError("results csv line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return out;
}

void write_results_csv(const fs::path& path, const std::vector<ResultRecord>& records) {
  write_text_file(path, records_to_csv(records));
}

std::vector<ResultRecord> read_results_csv(const fs::path& path) {
  try {
    return records_from_csv(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void check_split_separation(const std::vector<ResultRecord>& test_records,
                            const std::vector<ResultRecord>& tuning_records) {
  for (const auto& r : test_records) {
    if (r.instance_id.find("/test/") == std::string::npos) {
      throw ContractError("split leakage: reported record on non-test instance " + r.instance_id);
    }
  }
  for (const auto& r : tuning_records) {
    if (r.instance_id.find("/eval/") == std::string::npos) {
      throw ContractError("split leakage: tuning used non-eval instance " + r.instance_id);
    }
  }
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

struct Setting {
  GraphModelConfig cfg;
  CostSetting cost;
  std::string name() const { return setting_name(cfg, cost); }
};

struct Splits {
  std::vector<GameInstance> train, eval, test;
  std::string dataset_hash;
};

struct Episode {
  double value = 0.0;
  double ms = 0.0;
};

template <typename F>
Episode timed(F fn) {
  const auto t0 = std::chrono::steady_clock::now();
  const double value = fn();
  const auto t1 = std::chrono::steady_clock::now();
  return {value, std::chrono::duration<double, std::milli>(t1 - t0).count()};
}

std::vector<GameInstance> take(std::vector<GameInstance> v, int limit) {
  if (limit > 0 && static_cast<int>(v.size()) > limit) v.resize(limit);
  return v;
}

class Runner {
 public:
  Runner(const ExperimentSpec& spec, const RunOptions& options)
      : spec_(spec), options_(options), data_dir_(spec.resolved_data_dir()) {}

  RunOutput run() {
    RunOutput out;
    for (Method method : spec_.methods) {
      for (GraphModel model : spec_.models) {
        for (int n : spec_.sizes) {
          for (CostSetting cost : spec_.cost_settings) {
            if (!method_applies(method, n, cost)) continue;
            const Setting setting = make_setting(model, n, cost);
            for (Objective objective : spec_.objectives) {
              for (std::uint64_t seed : spec_.seeds) {
                run_group(method, setting, objective, seed, out);
              }
            }
          }
        }
      }
    }
    check_split_separation(out.test_records, out.tuning_records);
    write_results_csv(spec_.output_dir / "results.csv", out.test_records);
    write_results_csv(spec_.output_dir / "tuning.csv", out.tuning_records);
    json datasets = json::object();
    for (const auto& [name, splits] : splits_) datasets[name] = splits.dataset_hash;
    json manifest{{"code_version", PGG_VERSION},
                  {"spec", spec_to_json(spec_)},
                  {"datasets", datasets},
                  {"results", "results.csv"},
                  {"tuning", "tuning.csv"},
                  {"records", out.test_records.size()}};
    write_text_file(spec_.output_dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
  }

 private:
  Setting make_setting(GraphModel model, int n, CostSetting cost) const {
    Setting s{spec_.graph, cost};
    s.cfg.model = model;
    s.cfg.n = n;
    return s;
  }

  void log(const std::string& line) const {
    if (options_.log) options_.log(line);
  }

  const Splits& splits(const Setting& s) {
    const std::string name = s.name();
    auto it = splits_.find(name);
    if (it != splits_.end()) return it->second;
    const fs::path dir = ensure_dataset(data_dir_, s.cfg, s.cost, spec_.counts, spec_.master_seed);
    Splits sp;
    sp.train = take(load_split(data_dir_, s.cfg, s.cost, Split::kTrain).instances, spec_.demo_instances);
    sp.eval = take(load_split(data_dir_, s.cfg, s.cost, Split::kEval).instances, spec_.tune_instances);
    sp.test = take(load_split(data_dir_, s.cfg, s.cost, Split::kTest).instances, spec_.test_instances);
    sp.dataset_hash = manifest_hash(dir);
    return splits_.emplace(name, std::move(sp)).first->second;
  }

  static std::string group_key(Method method, const Setting& s, Objective objective,
                               std::uint64_t seed) {
    return std::string(to_string(method)) + "_" + s.name() + "_" +
           std::string(to_string(objective)) + "_s" + std::to_string(seed);
  }

  // Settings that influence a group's results; a stored group is only reused
  // when these match.
  json group_config(Method method) const {
    json c{{"master_seed", spec_.master_seed},
           {"tune_instances", spec_.tune_instances},
           {"test_instances", spec_.test_instances}};
    switch (method) {
      case Method::kUct:
        c["uct_cp"] = spec_.hyper_grids.uct_cp;
        c["uct_sims_factor"] = spec_.uct_sims_factor;
        break;
      case Method::kAnnealing:
        c["sa_epsilon"] = spec_.hyper_grids.sa_epsilon;
        c["sa_limits"] = {spec_.sa_no_improve_limit, spec_.sa_step_cutoff};
        c["sa_identical_cost_proxy"] = spec_.sa_identical_cost_proxy;
        break;
      case Method::kGil: {
        const json full = spec_to_json(spec_);
        c["uct_cp"] = spec_.hyper_grids.uct_cp;
        c["uct_sims_factor"] = spec_.uct_sims_factor;
        c["gil"] = {full["hyper_grids"]["gil_lr"], full["hyper_grids"]["gil_rounds"],
                    full["hyper_grids"]["gil_strategy"], spec_.gil_steps, spec_.gil_batch_size,
                    spec_.gil_validate_every, full["gil_features"], spec_.demo_instances,
                    gil_train_sizes()};
        break;
      }
      default: break;
    }
    return c;
  }

  void run_group(Method method, const Setting& setting, Objective objective, std::uint64_t seed,
                 RunOutput& out) {
    const Splits& sp = splits(setting);
    const std::string key = group_key(method, setting, objective, seed);
    const fs::path parts = spec_.output_dir / "parts";
    const fs::path done = parts / (key + ".done");
    const json config = group_config(method);
    if (fs::exists(done)) {
      const json marker = json::parse(read_text_file(done));
      if (marker.value("dataset_hash", std::string{}) != sp.dataset_hash ||
          marker.value("config", json{}) != config) {
        throw ContractError("stored group " + key +
                            " was produced with a different dataset or configuration; "
                            "remove " + done.string() + " to recompute it");
      }
      auto test = read_results_csv(parts / (key + ".csv"));
      auto tune = read_results_csv(parts / (key + ".tune.csv"));
      if (method == Method::kUct && marker.contains("cp")) {
        tuned_cp_[cp_key(setting, objective, seed)] = marker["cp"].get<double>();
      }
      out.test_records.insert(out.test_records.end(), test.begin(), test.end());
      out.tuning_records.insert(out.tuning_records.end(), tune.begin(), tune.end());
      ++out.groups_resumed;
      return;
    }

    std::vector<ResultRecord> test, tune;
    json hyper = json::object();
    evaluate_group(method, setting, objective, seed, sp, test, tune, hyper);
    write_results_csv(parts / (key + ".csv"), test);
    write_results_csv(parts / (key + ".tune.csv"), tune);
    json marker{{"dataset_hash", sp.dataset_hash}, {"config", config}, {"hyperparams", hyper}};
    if (method == Method::kUct) marker["cp"] = hyper["cp"];
    write_text_file(done, marker.dump() + "\n");

    std::vector<double> values;
    for (const auto& r : test) values.push_back(r.value);
    log(key + ": " + hyper.dump() + " test mean " + fmt("%.4f", mean_of(values)));
    out.test_records.insert(out.test_records.end(), test.begin(), test.end());
    out.tuning_records.insert(out.tuning_records.end(), tune.begin(), tune.end());
    ++out.groups_computed;
  }

  ResultRecord base_record(Method method, const Setting& s, Objective objective,
                           std::uint64_t seed) const {
    ResultRecord r;
    r.method = std::string(to_string(method));
    r.model = std::string(to_string(s.cfg.model));
    r.n = s.cfg.n;
    r.cost_setting = std::string(to_string(s.cost));
    r.objective = std::string(to_string(objective));
    r.seed = seed;
    return r;
  }

  // One episode of a method with fixed hyperparameters.
  using EpisodeFn = std::function<double(const GameInstance&, std::uint64_t)>;

  std::vector<ResultRecord> evaluate_on(const std::vector<GameInstance>& instances,
                                        const EpisodeFn& fn, const ResultRecord& base,
                                        const json& hyper, std::uint64_t seed) const {
    std::vector<ResultRecord> records(instances.size(), base);
    parallel_for(static_cast<int>(instances.size()), spec_.workers, [&](int i) {
      const auto& inst = instances[i];
      const std::uint64_t task_seed = instance_task_seed(seed, inst.instance_id);
      const Episode e = timed([&] { return fn(inst, task_seed); });
      records[i].instance_id = inst.instance_id;
      records[i].value = e.value;
      records[i].wall_time_ms = e.ms;
      records[i].hyperparams_json = hyper.dump();
    });
    return records;
  }

  // Grid search on the eval split: returns the index of the best candidate
  // (first on ties) and appends every evaluation to `tune`.
  std::size_t tune_grid(const std::vector<json>& candidates,
                        const std::function<EpisodeFn(const json&)>& make_fn,
                        const std::vector<GameInstance>& eval, const ResultRecord& base,
                        std::uint64_t seed, std::vector<ResultRecord>& tune) const {
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      auto records = evaluate_on(eval, make_fn(candidates[c]), base, candidates[c], seed);
      std::vector<double> values;
      for (const auto& r : records) values.push_back(r.value);
      const double m = mean_of(values);
      if (m > best_mean) {
        best_mean = m;
        best = c;
      }
      tune.insert(tune.end(), records.begin(), records.end());
    }
    return best;
  }

  EpisodeFn uct_fn(double cp, Objective objective) const {
    return [cp, objective, this](const GameInstance& inst, std::uint64_t s) {
      UctConfig c;
      c.cp = cp;
      c.sims_per_move_factor = spec_.uct_sims_factor;
      c.seed = s;
      return plan_episode(inst, c, objective, false).value;
    };
  }

  static std::string cp_key(const Setting& s, Objective objective, std::uint64_t seed) {
    return s.name() + "_" + std::string(to_string(objective)) + "_" + std::to_string(seed);
  }

  // UCT exploration constant tuned on the eval split (memoized).
  double tuned_cp(const Setting& s, Objective objective, std::uint64_t seed) {
    const std::string key = cp_key(s, objective, seed);
    if (auto it = tuned_cp_.find(key); it != tuned_cp_.end()) return it->second;
    std::vector<ResultRecord> scratch;
    std::vector<json> candidates;
    for (double cp : spec_.hyper_grids.uct_cp) candidates.push_back({{"cp", cp}});
    const auto best = tune_grid(
        candidates, [&](const json& h) { return uct_fn(h["cp"].get<double>(), objective); },
        splits(s).eval, base_record(Method::kUct, s, objective, seed), seed, scratch);
    const double cp = spec_.hyper_grids.uct_cp[best];
    tuned_cp_[key] = cp;
    return cp;
  }

  std::vector<int> gil_train_sizes() const {
    std::vector<int> sizes = spec_.gil_train_sizes.empty() ? spec_.sizes : spec_.gil_train_sizes;
    std::sort(sizes.begin(), sizes.end());
    return sizes;
  }

  const std::vector<Demonstration>& demonstrations(const Setting& s, Objective objective,
                                                   std::uint64_t seed) {
    const std::string key = cp_key(s, objective, seed);
    if (auto it = demos_.find(key); it != demos_.end()) return it->second;
    const double cp = tuned_cp(s, objective, seed);
    const auto& train = splits(s).train;
    std::vector<std::vector<Demonstration>> per(train.size());
    parallel_for(static_cast<int>(train.size()), spec_.workers, [&](int i) {
      UctConfig c;
      c.cp = cp;
      c.sims_per_move_factor = spec_.uct_sims_factor;
      c.seed = instance_task_seed(seed, train[i].instance_id);
      per[i] = plan_episode(train[i], c, objective, true).demonstrations;
    });
    std::vector<Demonstration> all;
    for (auto& d : per) all.insert(all.end(), d.begin(), d.end());
    log("collected " + std::to_string(all.size()) + " demonstrations for " + key);
    return demos_.emplace(key, std::move(all)).first->second;
  }

  struct GilModel {
    GnnParams params;
    json hyper;
  };

  // Trains (or reuses) the GIL model used for a setting.
  const GilModel& gil_model(const Setting& s, Objective objective, std::uint64_t seed,
                            std::vector<ResultRecord>* tune) {
    const auto sizes = gil_train_sizes();
    int train_n = -1;
    for (int m : sizes) {
      if (m <= s.cfg.n) train_n = m;
    }
    if (train_n < 0) {
      throw ConfigError("gil: no training size at or below n=" + std::to_string(s.cfg.n));
    }
    if (train_n != s.cfg.n) {
      Setting smaller = s;
      smaller.cfg.n = train_n;
      return gil_model(smaller, objective, seed, nullptr);
    }
    const std::string key = cp_key(s, objective, seed);
    if (auto it = models_.find(key); it != models_.end()) return it->second;

    const fs::path model_path =
        spec_.output_dir / "models" / (group_key(Method::kGil, s, objective, seed) + ".json");
    const fs::path hyper_path = fs::path(model_path).replace_extension(".hyper.json");
    if (tune == nullptr && fs::exists(model_path) && fs::exists(hyper_path)) {
      GilModel m{load_model(model_path), json::parse(read_text_file(hyper_path))};
      return models_.emplace(key, std::move(m)).first->second;
    }

    DemonstrationSets datasets;
    for (int m : sizes) {
      if (m > s.cfg.n) break;
      Setting at = s;
      at.cfg.n = m;
      datasets[m] = demonstrations(at, objective, seed);
    }
    const auto& eval = splits(s).eval;
    const FeatureSet features = resolve_features(spec_.gil_features, s.cost);
    const ResultRecord base = base_record(Method::kGil, s, objective, seed);

    std::optional<GilModel> best;
    double best_score = -1.0;
    for (TrainStrategy strategy : spec_.hyper_grids.gil_strategy) {
      // With a single dataset every strategy trains on the same schedule.
      if (datasets.size() == 1 && strategy != spec_.hyper_grids.gil_strategy.front()) continue;
      for (int rounds : spec_.hyper_grids.gil_rounds) {
        for (double lr : spec_.hyper_grids.gil_lr) {
          TrainConfig tc;
          tc.learning_rate = lr;
          tc.batch_size = spec_.gil_batch_size;
          tc.total_steps = spec_.gil_steps;
          tc.validate_every = spec_.gil_validate_every;
          tc.strategy = strategy;
          tc.target_n = s.cfg.n;
          tc.seed = mix_seed(seed, fnv1a64(key));
          tc.objective = objective;
          tc.gnn.rounds = rounds;
          tc.gnn.features = features;
          const TrainResult result = train(datasets, tc, eval);
          json hyper{{"lr", lr},
                     {"K", rounds},
                     {"strategy", std::string(to_string(strategy))},
                     {"features", std::string(to_string(features))},
                     {"trained_n", s.cfg.n},
                     {"best_step", result.best_step}};
          if (tune != nullptr) {
            auto records = evaluate_on(
                eval,
                [&](const GameInstance& inst, std::uint64_t) {
                  return greedy_rollout(inst, result.best, objective).value;
                },
                base, hyper, seed);
            tune->insert(tune->end(), records.begin(), records.end());
          }
          if (result.best_score > best_score) {
            best_score = result.best_score;
            best = GilModel{result.best, hyper};
          }
        }
      }
    }
    save_model(model_path, best->params);
    write_text_file(hyper_path, best->hyper.dump() + "\n");
    return models_.emplace(key, std::move(*best)).first->second;
  }

  void evaluate_group(Method method, const Setting& s, Objective objective, std::uint64_t seed,
                      const Splits& sp, std::vector<ResultRecord>& test,
                      std::vector<ResultRecord>& tune, json& hyper) {
    const ResultRecord base = base_record(method, s, objective, seed);
    EpisodeFn fn;
    switch (method) {
      case Method::kExhaustive:
        fn = [objective](const GameInstance& inst, std::uint64_t) {
          return exhaustive_search(inst, objective).value;
        };
        break;
      case Method::kBestResponse:
        fn = [objective](const GameInstance& inst, std::uint64_t sd) {
          return best_response(inst, objective, sd).value;
        };
        break;
      case Method::kPayoffTransfer:
        fn = [objective](const GameInstance& inst, std::uint64_t sd) {
          return payoff_transfer(inst, objective, sd).value;
        };
        break;
      case Method::kRandom:
        fn = [objective](const GameInstance& inst, std::uint64_t sd) {
          return random_mis(inst, objective, sd).value;
        };
        break;
      case Method::kTargetHubs:
        fn = [objective](const GameInstance& inst, std::uint64_t) {
          return target_hubs(inst, objective).value;
        };
        break;
      case Method::kTargetLowestCost:
        fn = [objective](const GameInstance& inst, std::uint64_t) {
          return target_lowest_cost(inst, objective).value;
        };
        break;
      case Method::kAnnealing: {
        auto make = [&](const json& h) -> EpisodeFn {
          SaConfig c;
          c.epsilon = h["epsilon"].get<double>();
          c.no_improve_limit = spec_.sa_no_improve_limit;
          c.step_cutoff = spec_.sa_step_cutoff;
          c.identical_cost_proxy = spec_.sa_identical_cost_proxy;
          return [c, objective](const GameInstance& inst, std::uint64_t sd) {
            SaConfig local = c;
            local.seed = sd;
            return simulated_annealing(inst, objective, local).value;
          };
        };
        std::vector<json> candidates;
        for (double e : spec_.hyper_grids.sa_epsilon) candidates.push_back({{"epsilon", e}});
        hyper = candidates[tune_grid(candidates, make, sp.eval, base, seed, tune)];
        fn = make(hyper);
        break;
      }
      case Method::kUct: {
        std::vector<json> candidates;
        for (double cp : spec_.hyper_grids.uct_cp) candidates.push_back({{"cp", cp}});
        const auto best = tune_grid(
            candidates, [&](const json& h) { return uct_fn(h["cp"].get<double>(), objective); },
            sp.eval, base, seed, tune);
        hyper = candidates[best];
        tuned_cp_[cp_key(s, objective, seed)] = hyper["cp"].get<double>();
        hyper["sims_factor"] = spec_.uct_sims_factor;
        fn = uct_fn(candidates[best]["cp"].get<double>(), objective);
        break;
      }
      case Method::kGil: {
        const bool trains_here = [&] {
          const auto sizes = gil_train_sizes();
          return std::find(sizes.begin(), sizes.end(), s.cfg.n) != sizes.end();
        }();
        const GilModel& model = gil_model(s, objective, seed, trains_here ? &tune : nullptr);
        hyper = model.hyper;
        const GnnParams* params = &model.params;
        fn = [params, objective](const GameInstance& inst, std::uint64_t) {
          return greedy_rollout(inst, *params, objective).value;
        };
        break;
      }
    }
    test = evaluate_on(sp.test, fn, base, hyper, seed);
  }

  const ExperimentSpec& spec_;
  const RunOptions& options_;
  fs::path data_dir_;
  std::map<std::string, Splits> splits_;
  std::map<std::string, double> tuned_cp_;
  std::map<std::string, std::vector<Demonstration>> demos_;
  std::map<std::string, GilModel> models_;
};

}  // namespace

RunOutput run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  Runner runner(spec, options);
  return runner.run();
}

// ---------------------------------------------------------------------------
// Reports

std::string Table::to_csv() const {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out;
}

double sample_stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double x : values) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

// (cost, model, objective, n); n = -1 when aggregated over sizes.
using CellKey = std::tuple<std::string, std::string, std::string, int>;

std::vector<std::string> method_order(const std::vector<ResultRecord>& records) {
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  return order;
}

CellKey cell_of(const ResultRecord& r, bool by_n) {
  return {r.cost_setting, r.model, r.objective, by_n ? r.n : -1};
}

std::vector<std::string> cell_columns(const CellKey& k, bool by_n) {
  std::vector<std::string> row{std::get<0>(k), std::get<1>(k), std::get<2>(k)};
  if (by_n) row.push_back(std::to_string(std::get<3>(k)));
  return row;
}

Table mean_table(const std::vector<ResultRecord>& records, bool by_n) {
  const auto methods = method_order(records);
  // cell -> method -> seed -> n -> values
  std::map<CellKey, std::map<std::string, std::map<std::uint64_t, std::map<int, std::vector<double>>>>> data;
  for (const auto& r : records) data[cell_of(r, by_n)][r.method][r.seed][r.n].push_back(r.value);

  Table t;
  t.header = {"cost_setting", "model", "objective"};
  if (by_n) t.header.push_back("n");
  for (const auto& m : methods) {
    t.header.push_back(m + "_mean");
    t.header.push_back(m + "_std");
  }
  for (const auto& [cell, per_method] : data) {
    auto row = cell_columns(cell, by_n);
    for (const auto& m : methods) {
      auto it = per_method.find(m);
      if (it == per_method.end()) {
        row.insert(row.end(), {"", ""});
        continue;
      }
      std::vector<double> seed_means;
      for (const auto& [seed, per_n] : it->second) {
        std::vector<double> n_means;
        for (const auto& [n, values] : per_n) n_means.push_back(mean_of(values));
        seed_means.push_back(mean_of(n_means));
      }
      row.push_back(fmt("%.6f", mean_of(seed_means)));
      row.push_back(fmt("%.6f", sample_stddev(seed_means)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

Table mean_reward_table(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw InputError("mean reward table: no records");
  return mean_table(records, true);
}

Table mean_reward_table_by_setting(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw InputError("mean reward table: no records");
  return mean_table(records, false);
}

Table win_rate_table(const std::vector<ResultRecord>& records, std::uint64_t tie_seed) {
  const auto methods = method_order(records);
  using Unit = std::pair<std::uint64_t, std::string>;
  std::map<CellKey, std::map<std::string, std::map<Unit, double>>> data;
  for (const auto& r : records) {
    auto& slot = data[cell_of(r, true)][r.method];
    if (!slot.emplace(Unit{r.seed, r.instance_id}, r.value).second) {
      throw InputError("win rates: duplicate record for method " + r.method + ", seed " +
                       std::to_string(r.seed) + ", instance " + r.instance_id);
    }
  }
  Table t;
  t.header = {"cost_setting", "model", "objective", "n"};
  for (const auto& m : methods) t.header.push_back(m);
  for (const auto& [cell, per_method] : data) {
    const std::string cell_name = std::get<0>(cell) + "-" + std::get<1>(cell) + "-" +
                                  std::get<2>(cell) + "-" + std::to_string(std::get<3>(cell));
    std::set<Unit> units;
    for (const auto& [m, values] : per_method) {
      for (const auto& [u, _] : values) units.insert(u);
    }
    for (const auto& [m, values] : per_method) {
      for (const auto& u : units) {
        if (!values.count(u)) {
          throw InputError("win rates: setting " + cell_name + ": method " + m +
                           " has no result for seed " + std::to_string(u.first) + ", instance " +
                           u.second);
        }
      }
    }
    std::map<std::string, long> wins;
    for (const auto& u : units) {
      double best = -1.0;
      std::vector<std::string> tied;
      for (const auto& [m, values] : per_method) {
        const double v = values.at(u);
        if (v > best) {
          best = v;
          tied.assign(1, m);
        } else if (v == best) {
          tied.push_back(m);
        }
      }
      std::size_t pick = 0;
      if (tied.size() > 1) {
        Rng rng(mix_seed(tie_seed, fnv1a64(cell_name + "|" + std::to_string(u.first) + "|" + u.second)));
        pick = rng.uniform_index(tied.size());
      }
      ++wins[tied[pick]];
    }
    auto row = cell_columns(cell, true);
    for (const auto& m : methods) {
      if (!per_method.count(m)) {
        row.emplace_back("");
        continue;
      }
      row.push_back(fmt("%.2f", 100.0 * static_cast<double>(wins[m]) / static_cast<double>(units.size())));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table timing_report(const std::vector<ResultRecord>& records) {
  const auto methods = method_order(records);
  std::map<std::string, std::map<int, std::vector<double>>> times;
  for (const auto& r : records) times[r.method][r.n].push_back(r.wall_time_ms);
  Table t;
  t.header = {"method", "n", "mean_ms", "episodes"};
  for (const auto& m : methods) {
    for (const auto& [n, values] : times[m]) {
      t.rows.push_back({m, std::to_string(n), fmt("%.4f", mean_of(values)), std::to_string(values.size())});
    }
  }
  return t;
}

}  // namespace pgg
