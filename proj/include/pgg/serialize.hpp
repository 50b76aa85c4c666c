#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgg/game.hpp"

namespace pgg {

/// {"n", "edges": [[u,v],...] with u<v, "costs", "cost_setting", "instance_id"}.
nlohmann::json instance_to_json(const GameInstance& inst);
/// Parses and validates; throws InputError on malformed content.
GameInstance instance_from_json(const nlohmann::json& j);

nlohmann::json edges_to_json(const Graph& g);
Graph graph_from_json(int n, const nlohmann::json& edges);

/// One compact JSON document per line.
void write_instances_jsonl(const std::filesystem::path& path,
                           const std::vector<GameInstance>& instances);
std::vector<GameInstance> read_instances_jsonl(const std::filesystem::path& path);

/// Reads a `.json` file holding one instance, or the `index`-th line of a `.jsonl`.
GameInstance read_instance_file(const std::filesystem::path& path, std::size_t index = 0);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace pgg
