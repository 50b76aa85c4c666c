#include "pgg/serialize.hpp"

#include <fstream>
#include <sstream>

#include "pgg/errors.hpp"

namespace pgg {

using nlohmann::json;

json edges_to_json(const Graph& g) {
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.first, e.second});
  return edges;
}

Graph graph_from_json(int n, const json& edges) {
  std::vector<Edge> list;
  list.reserve(edges.size());
  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 2) throw InputError("edge entry must be a pair");
    list.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  return Graph(n, list);
}

json instance_to_json(const GameInstance& inst) {
  return json{{"n", inst.num_players()},
              {"edges", edges_to_json(inst.graph)},
              {"costs", inst.costs},
              {"cost_setting", std::string(to_string(inst.cost_setting))},
              {"instance_id", inst.instance_id}};
}

GameInstance instance_from_json(const json& j) {
  try {
    GameInstance inst;
    const int n = j.at("n").get<int>();
    inst.graph = graph_from_json(n, j.at("edges"));
    inst.costs = j.at("costs").get<std::vector<double>>();
    auto setting = parse_cost_setting(j.at("cost_setting").get<std::string>());
    if (!setting) throw InputError("unknown cost_setting");
    inst.cost_setting = *setting;
    inst.instance_id = j.value("instance_id", std::string{});
    inst.validate();
    return inst;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed instance JSON: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_instances_jsonl(const std::filesystem::path& path,
                           const std::vector<GameInstance>& instances) {
  std::string text;
  for (const auto& inst : instances) {
    text += instance_to_json(inst).dump();
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<GameInstance> read_instances_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<GameInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

GameInstance read_instance_file(const std::filesystem::path& path, std::size_t index) {
  if (path.extension() == ".jsonl") {
    auto all = read_instances_jsonl(path);
    if (index >= all.size()) {
      throw IoError(path.string() + ": no instance at index " + std::to_string(index));
    }
    return all[index];
  }
  try {
    return instance_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace pgg
