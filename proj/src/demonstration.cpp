#include "pgg/demonstration.hpp"

#include <fstream>
#include <map>
#include <numeric>

#include "pgg/errors.hpp"
#include "pgg/serialize.hpp"

namespace pgg {

using nlohmann::json;

long Demonstration::total_visits() const {
  return std::accumulate(visit_counts.begin(), visit_counts.end(), 0L);
}

MdpState Demonstration::state() const {
  MdpState s(*instance);
  for (int v : independent_set) s.apply(v);
  return s;
}

void Demonstration::validate() const {
  if (!instance) throw InputError("demonstration without instance");
  if (visit_counts.size() != valid_actions.size()) {
    throw InputError("demonstration: visit_counts and valid_actions differ in length");
  }
  for (long c : visit_counts) {
    if (c < 0) throw InputError("demonstration: negative visit count");
  }
  if (total_visits() <= 0) throw InputError("demonstration: no visits recorded");
  try {
    if (state().valid_actions() != valid_actions) {
      throw InputError("demonstration: valid_actions disagree with the replayed state");
    }
  } catch (const ContractError& e) {
    throw InputError(std::string("demonstration: independent set is not valid: ") + e.what());
  }
}

void write_demonstrations(const std::filesystem::path& path,
                          const std::vector<Demonstration>& demos) {
  std::string text;
  for (const auto& d : demos) {
    json j{{"instance_id", d.instance->instance_id},
           {"edges", edges_to_json(d.instance->graph)},
           {"n", d.num_players()},
           {"independent_set", d.independent_set},
           {"valid_actions", d.valid_actions},
           {"visit_counts", d.visit_counts},
           {"costs", d.instance->costs},
           {"cost_setting", std::string(to_string(d.instance->cost_setting))}};
    text += j.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<Demonstration> read_demonstrations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::shared_ptr<const GameInstance>> instances;
  std::vector<Demonstration> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string id = j.at("instance_id").get<std::string>();
      auto& inst = instances[id];
      if (!inst) {
        GameInstance g;
        const int n = j.at("n").get<int>();
        g.graph = graph_from_json(n, j.at("edges"));
        g.instance_id = id;
        if (j.contains("costs")) {
          g.costs = j["costs"].get<std::vector<double>>();
          g.cost_setting = parse_cost_setting(j.value("cost_setting", std::string("HC")))
                               .value_or(CostSetting::kHeterogeneous);
        } else {
          g.costs.assign(n, 0.5);
          g.cost_setting = CostSetting::kIdentical;
        }
        g.validate();
        inst = std::make_shared<const GameInstance>(std::move(g));
      }
      Demonstration d{inst, j.at("independent_set").get<std::vector<int>>(),
                      j.at("valid_actions").get<std::vector<int>>(),
                      j.at("visit_counts").get<std::vector<long>>()};
      d.validate();
      out.push_back(std::move(d));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pgg
