#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "occ/scene.hpp"

namespace occ {

// Scene file layout (JSON, UTF-8):
//   spec:          { origin, voxel_size, dims }
//   labels_rle:    [[class, count], ...] over x-fastest flat order
//   instances_rle: [[id, count], ...], -1 = no instance
//   ego:           [x, y, z]
//   objects:       ground-truth records
// plus self-description keys: classes, feature_seed, feature_dim.
// Labels and instance ids round-trip bit-exactly; visibility and features
// are rebuilt deterministically on load.

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

nlohmann::json grid_spec_to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);
nlohmann::json class_table_to_json(const ClassTable& table);
ClassTable class_table_from_json(const nlohmann::json& j);

// Generation config files. Missing keys keep their defaults, so a config
// file only has to name what it changes.
nlohmann::json scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j);
SceneConfig load_scene_config(const std::filesystem::path& path);

std::vector<std::pair<int, std::size_t>> rle_encode(const std::vector<int>& values);
std::vector<int> rle_decode(const std::vector<std::pair<int, std::size_t>>& runs,
                            std::size_t expected_size);

}  // namespace occ
