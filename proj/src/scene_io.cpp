#include "occ/scene_io.hpp"

#include <fstream>
#include <stdexcept>

namespace occ {

namespace {

nlohmann::json vec3_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x, v.y, v.z});
}

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("scene file: expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ClassKind kind_from_string(const std::string& s) {
  if (s == "empty") return ClassKind::empty;
  if (s == "stuff") return ClassKind::stuff;
  if (s == "thing") return ClassKind::thing;
  throw std::invalid_argument("scene file: unknown class kind '" + s + "'");
}

std::string kind_to_string(ClassKind k) {
  switch (k) {
    case ClassKind::empty: return "empty";
    case ClassKind::stuff: return "stuff";
    case ClassKind::thing: return "thing";
  }
  return "empty";
}

nlohmann::json rle_to_json(const std::vector<std::pair<int, std::size_t>>& runs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [value, count] : runs)
    out.push_back(nlohmann::json::array({value, count}));
  return out;
}

std::vector<std::pair<int, std::size_t>> rle_from_json(const nlohmann::json& j) {
  std::vector<std::pair<int, std::size_t>> runs;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::invalid_argument("scene file: malformed RLE pair");
    runs.emplace_back(pair[0].get<int>(), pair[1].get<std::size_t>());
  }
  return runs;
}

}  // namespace

std::vector<std::pair<int, std::size_t>> rle_encode(const std::vector<int>& values) {
  std::vector<std::pair<int, std::size_t>> runs;
  for (int v : values) {
    if (!runs.empty() && runs.back().first == v)
      ++runs.back().second;
    else
      runs.emplace_back(v, 1);
  }
  return runs;
}

std::vector<int> rle_decode(const std::vector<std::pair<int, std::size_t>>& runs,
                            std::size_t expected_size) {
  std::vector<int> values;
  values.reserve(expected_size);
  for (const auto& [value, count] : runs)
    values.insert(values.end(), count, value);
  if (values.size() != expected_size)
    throw std::invalid_argument("scene file: RLE length mismatch");
  return values;
}

nlohmann::json grid_spec_to_json(const GridSpec& spec) {
  return {{"origin", vec3_to_json(spec.origin)},
          {"voxel_size", vec3_to_json(spec.voxel_size)},
          {"dims", spec.dims}};
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
  GridSpec spec;
  spec.origin = vec3_from_json(j.at("origin"));
  spec.voxel_size = vec3_from_json(j.at("voxel_size"));
  spec.dims = j.at("dims").get<std::array<int, 3>>();
  spec.validate();
  return spec;
}

nlohmann::json class_table_to_json(const ClassTable& table) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < table.size(); ++i)
    out.push_back({{"name", table[i].name}, {"kind", kind_to_string(table[i].kind)}});
  return out;
}

ClassTable class_table_from_json(const nlohmann::json& j) {
  std::vector<ClassDef> defs;
  for (const auto& d : j)
    defs.push_back({d.at("name").get<std::string>(),
                    kind_from_string(d.at("kind").get<std::string>())});
  return ClassTable(std::move(defs));
}

namespace {

std::string shape_to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::box: return "box";
    case ShapeKind::l_shape: return "l_shape";
    case ShapeKind::cylinder: return "cylinder";
  }
  return "box";
}

ShapeKind shape_from_string(const std::string& s) {
  if (s == "box") return ShapeKind::box;
  if (s == "l_shape") return ShapeKind::l_shape;
  if (s == "cylinder") return ShapeKind::cylinder;
  throw std::invalid_argument("scene config: unknown shape kind '" + s + "'");
}

}  // namespace

nlohmann::json scene_config_to_json(const SceneConfig& cfg) {
  nlohmann::json shapes = nlohmann::json::array();
  for (ShapeKind k : cfg.shape_kinds) shapes.push_back(shape_to_string(k));
  nlohmann::json j{{"seed", cfg.seed},
                   {"grid", grid_spec_to_json(cfg.grid)},
                   {"classes", class_table_to_json(cfg.class_table)},
                   {"min_objects", cfg.min_objects},
                   {"max_objects", cfg.max_objects},
                   {"shape_kinds", std::move(shapes)},
                   {"stuff_layers", cfg.stuff_layers},
                   {"min_extent", cfg.min_extent},
                   {"max_extent", cfg.max_extent},
                   {"max_object_voxels", cfg.max_object_voxels},
                   {"feature_dim", cfg.feature_dim},
                   {"label_flip_rate", cfg.corruption.label_flip_rate},
                   {"center_noise_sigma", cfg.corruption.center_noise_sigma}};
  if (cfg.ego) j["ego"] = vec3_to_json(*cfg.ego);
  return j;
}

SceneConfig scene_config_from_json(const nlohmann::json& j) {
  SceneConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("grid")) cfg.grid = grid_spec_from_json(j.at("grid"));
  if (j.contains("classes"))
    cfg.class_table = class_table_from_json(j.at("classes"));
  if (j.contains("min_objects")) cfg.min_objects = j.at("min_objects").get<int>();
  if (j.contains("max_objects")) cfg.max_objects = j.at("max_objects").get<int>();
  if (j.contains("shape_kinds")) {
    cfg.shape_kinds.clear();
    for (const auto& s : j.at("shape_kinds"))
      cfg.shape_kinds.push_back(shape_from_string(s.get<std::string>()));
  }
  if (j.contains("stuff_layers")) cfg.stuff_layers = j.at("stuff_layers").get<int>();
  if (j.contains("min_extent")) cfg.min_extent = j.at("min_extent").get<int>();
  if (j.contains("max_extent")) cfg.max_extent = j.at("max_extent").get<int>();
  if (j.contains("max_object_voxels"))
    cfg.max_object_voxels = j.at("max_object_voxels").get<int>();
  if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim").get<int>();
  if (j.contains("ego")) cfg.ego = vec3_from_json(j.at("ego"));
  if (j.contains("label_flip_rate"))
    cfg.corruption.label_flip_rate = j.at("label_flip_rate").get<double>();
  if (j.contains("center_noise_sigma"))
    cfg.corruption.center_noise_sigma = j.at("center_noise_sigma").get<double>();
  cfg.validate();
  return cfg;
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_scene_config: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return scene_config_from_json(j);
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["spec"] = grid_spec_to_json(scene.semantic.spec);
  j["labels_rle"] = rle_to_json(rle_encode(scene.semantic.labels.data()));
  j["instances_rle"] = rle_to_json(rle_encode(scene.panoptic.instance_ids.data()));
  j["ego"] = vec3_to_json(scene.ego);
  nlohmann::json objects = nlohmann::json::array();
  for (const GroundTruthObject& o : scene.objects) {
    nlohmann::json voxels = nlohmann::json::array();
    for (const VoxelIndex& v : o.voxels)
      voxels.push_back(nlohmann::json::array({v.x, v.y, v.z}));
    objects.push_back({{"class_id", o.class_id},
                       {"center", vec3_to_json(o.center)},
                       {"voxels", std::move(voxels)},
                       {"instance_id", o.instance_id},
                       {"visible_voxel_count", o.visible_voxel_count}});
  }
  j["objects"] = std::move(objects);
  j["classes"] = class_table_to_json(scene.class_table);
  j["feature_seed"] = scene.feature_seed;
  j["feature_dim"] = scene.features.dim;
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  const GridSpec spec = grid_spec_from_json(j.at("spec"));
  scene.class_table = class_table_from_json(j.at("classes"));

  scene.semantic.spec = spec;
  scene.semantic.labels = Grid3<int>(spec.dims);
  scene.semantic.labels.data() =
      rle_decode(rle_from_json(j.at("labels_rle")), spec.voxel_count());

  scene.panoptic = make_panoptic_grid(spec);
  scene.panoptic.labels = scene.semantic.labels;
  scene.panoptic.instance_ids.data() =
      rle_decode(rle_from_json(j.at("instances_rle")), spec.voxel_count());

  scene.ego = vec3_from_json(j.at("ego"));

  for (const auto& record : j.at("objects")) {
    std::vector<VoxelIndex> voxels;
    for (const auto& v : record.at("voxels"))
      voxels.push_back({v[0].get<int>(), v[1].get<int>(), v[2].get<int>()});
    GroundTruthObject obj = make_ground_truth_object(
        spec, record.at("class_id").get<int>(), std::move(voxels),
        record.at("instance_id").get<int>(),
        record.at("visible_voxel_count").get<int>());
    const Vec3 stored = vec3_from_json(record.at("center"));
    if (norm(stored - obj.center) > 1e-9)
      throw std::invalid_argument("scene file: object center is not the centroid");
    scene.objects.push_back(std::move(obj));
  }

  scene.visibility = compute_visibility(scene.semantic, scene.ego);
  scene.feature_seed = j.at("feature_seed").get<std::uint64_t>();
  scene.features = build_features(scene.semantic, j.at("feature_dim").get<int>(),
                                  scene.class_table.size(), scene.feature_seed);
  return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_scene: cannot open " + path.string());
  out << scene_to_json(scene).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_scene: write failed for " + path.string());
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scene: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return scene_from_json(j);
}

}  // namespace occ
