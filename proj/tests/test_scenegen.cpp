#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <queue>
#include <set>

#include "occ/scene.hpp"
#include "occ/scene_io.hpp"

using namespace occ;

namespace {

SceneConfig test_config(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.grid.origin = {0.0, 0.0, 0.0};
  cfg.grid.voxel_size = {0.4, 0.4, 0.4};
  cfg.grid.dims = {20, 20, 8};
  cfg.min_objects = 2;
  cfg.max_objects = 4;
  return cfg;
}

int connected_components(const std::vector<VoxelIndex>& voxels) {
  const std::set<VoxelIndex> all(voxels.begin(), voxels.end());
  std::set<VoxelIndex> seen;
  int components = 0;
  for (const VoxelIndex& start : voxels) {
    if (seen.count(start)) continue;
    ++components;
    std::queue<VoxelIndex> queue;
    queue.push(start);
    seen.insert(start);
    while (!queue.empty()) {
      const VoxelIndex v = queue.front();
      queue.pop();
      const VoxelIndex steps[6] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                   {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
      for (const VoxelIndex& s : steps) {
        const VoxelIndex n{v.x + s.x, v.y + s.y, v.z + s.z};
        if (all.count(n) && !seen.count(n)) {
          seen.insert(n);
          queue.push(n);
        }
      }
    }
  }
  return components;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const SceneConfig cfg = test_config(42);
  const Scene a = generate_scene(cfg);
  const Scene b = generate_scene(cfg);
  CHECK(a.semantic.labels == b.semantic.labels);
  CHECK(a.panoptic.instance_ids == b.panoptic.instance_ids);
  CHECK(a.features.values == b.features.values);
  CHECK(a.objects.size() == b.objects.size());

  SceneConfig other = cfg;
  other.seed = 43;
  const Scene c = generate_scene(other);
  CHECK(a.semantic.labels != c.semantic.labels);
}

TEST_CASE("generated scenes satisfy the structural contract") {
  for (std::uint64_t seed : {1ull, 7ull, 99ull, 1234ull}) {
    const SceneConfig cfg = test_config(seed);
    const Scene scene = generate_scene(cfg);

    const int n = static_cast<int>(scene.objects.size());
    CHECK(n >= cfg.min_objects);
    CHECK(n <= cfg.max_objects);

    // ground slab is stuff, all the way through
    for (int y = 0; y < cfg.grid.dims[1]; ++y)
      for (int x = 0; x < cfg.grid.dims[0]; ++x)
        CHECK(scene.class_table.is_stuff(scene.semantic.labels.at({x, y, 0})));

    std::set<VoxelIndex> seen_voxels;
    for (int i = 0; i < n; ++i) {
      const GroundTruthObject& o = scene.objects[i];
      CHECK(o.instance_id == i + 1);  // placement order
      CHECK(scene.class_table.is_thing(o.class_id));
      CHECK(static_cast<int>(o.voxels.size()) <= cfg.max_object_voxels);
      CHECK(connected_components(o.voxels) == 1);

      Vec3 centroid{};
      int min_z = cfg.grid.dims[2];
      for (std::size_t k = 0; k < o.voxels.size(); ++k) {
        CHECK(!seen_voxels.count(o.voxels[k]));  // no overlap between objects
        seen_voxels.insert(o.voxels[k]);
        CHECK(scene.semantic.labels.at(o.voxels[k]) == o.class_id);
        CHECK(scene.panoptic.instance_ids.at(o.voxels[k]) == o.instance_id);
        CHECK(voxel_center(cfg.grid, o.voxels[k]) == o.voxel_centers[k]);
        centroid = centroid + o.voxel_centers[k];
        min_z = std::min(min_z, o.voxels[k].z);
      }
      centroid = centroid * (1.0 / static_cast<double>(o.voxels.size()));
      CHECK(norm(centroid - o.center) < 1e-12);
      CHECK(min_z == cfg.stuff_layers);  // rests on the ground

      int visible = 0;
      for (const VoxelIndex& v : o.voxels)
        if (scene.visibility.visible.at(v)) ++visible;
      CHECK(o.visible_voxel_count == visible);
    }

    // instance ids appear nowhere outside their objects
    for (std::size_t i = 0; i < scene.panoptic.instance_ids.size(); ++i)
      if (scene.panoptic.instance_ids[i] >= 0)
        CHECK(seen_voxels.count(cfg.grid.index_from_flat(i)) == 1);
    CHECK(validate_panoptic(scene.panoptic, scene.class_table).empty());
  }
}

TEST_CASE("feature grid is one-hot plus seeded noise") {
  const SceneConfig cfg = test_config(5);
  const Scene scene = generate_scene(cfg);
  const int classes = scene.class_table.size();
  REQUIRE(scene.features.dim == cfg.feature_dim);
  for (std::size_t i = 0; i < scene.semantic.labels.size(); ++i) {
    const auto f = scene.features.at(cfg.grid.index_from_flat(i));
    for (int c = 0; c < classes; ++c)
      CHECK(f[static_cast<std::size_t>(c)] ==
            (c == scene.semantic.labels[i] ? 1.0 : 0.0));
  }
  const FeatureGrid again =
      build_features(scene.semantic, cfg.feature_dim, classes, scene.feature_seed);
  CHECK(again.values == scene.features.values);
  CHECK_THROWS_AS(build_features(scene.semantic, classes - 1, classes, 1),
                  std::invalid_argument);
}

TEST_CASE("scene config validation rejects bad ranges") {
  SceneConfig cfg = test_config(0);
  CHECK_NOTHROW(cfg.validate());
  cfg.min_objects = 5;
  cfg.max_objects = 2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = test_config(0);
  cfg.stuff_layers = 8;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = test_config(0);
  cfg.max_extent = 8;  // taller than the space above the slab
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = test_config(0);
  cfg.feature_dim = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = test_config(0);
  cfg.ego = Vec3{-5.0, 0.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("corrupt_baseline flips at the configured rate") {
  SceneConfig cfg = test_config(3);
  const Scene scene = generate_scene(cfg);

  SUBCASE("rate zero is the identity") {
    cfg.corruption.label_flip_rate = 0.0;
    CHECK(corrupt_baseline(scene, cfg).labels == scene.semantic.labels);
  }

  SUBCASE("rate one flips every non-empty label to a different class") {
    cfg.corruption.label_flip_rate = 1.0;
    const SemanticGrid out = corrupt_baseline(scene, cfg);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      if (scene.semantic.labels[i] == kEmptyClass) {
        CHECK(out.labels[i] == kEmptyClass);
      } else {
        CHECK(out.labels[i] != scene.semantic.labels[i]);
        CHECK(out.labels[i] != kEmptyClass);
        CHECK(out.labels[i] < scene.class_table.size());
      }
    }
  }

  SUBCASE("flip count stays within three sigma of the binomial mean") {
    const double rate = 0.3;
    cfg.corruption.label_flip_rate = rate;
    const SemanticGrid out = corrupt_baseline(scene, cfg);
    std::size_t non_empty = 0, flipped = 0;
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      if (scene.semantic.labels[i] == kEmptyClass) continue;
      ++non_empty;
      flipped += out.labels[i] != scene.semantic.labels[i];
    }
    const double mean = rate * static_cast<double>(non_empty);
    const double sigma = std::sqrt(mean * (1.0 - rate));
    CHECK(std::abs(static_cast<double>(flipped) - mean) <= 3.0 * sigma);
  }

  SUBCASE("deterministic in the seed") {
    cfg.corruption.label_flip_rate = 0.5;
    CHECK(corrupt_baseline(scene, cfg).labels == corrupt_baseline(scene, cfg).labels);
  }
}

TEST_CASE("scene json round-trips labels, ids, and objects exactly") {
  const SceneConfig cfg = test_config(321);
  const Scene scene = generate_scene(cfg);
  const Scene back = scene_from_json(scene_to_json(scene));

  CHECK(back.semantic.spec == scene.semantic.spec);
  CHECK(back.semantic.labels == scene.semantic.labels);
  CHECK(back.panoptic.instance_ids == scene.panoptic.instance_ids);
  CHECK(back.ego == scene.ego);
  CHECK(back.feature_seed == scene.feature_seed);
  CHECK(back.features.values == scene.features.values);
  CHECK(back.visibility.visible == scene.visibility.visible);
  REQUIRE(back.objects.size() == scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    CHECK(back.objects[i].class_id == scene.objects[i].class_id);
    CHECK(back.objects[i].instance_id == scene.objects[i].instance_id);
    CHECK(back.objects[i].voxels == scene.objects[i].voxels);
    CHECK(back.objects[i].center == scene.objects[i].center);
    CHECK(back.objects[i].visible_voxel_count ==
          scene.objects[i].visible_voxel_count);
  }
}

TEST_CASE("scene file save and load round-trip") {
  const SceneConfig cfg = test_config(11);
  const Scene scene = generate_scene(cfg);
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "occ_test_scene.json";
  save_scene(scene, path);
  const Scene back = load_scene(path);
  CHECK(back.semantic.labels == scene.semantic.labels);
  CHECK(back.panoptic.instance_ids == scene.panoptic.instance_ids);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_scene(path), std::runtime_error);
}

TEST_CASE("corrupted center stored in the file is rejected") {
  const Scene scene = generate_scene(test_config(2));
  nlohmann::json j = scene_to_json(scene);
  j["objects"][0]["center"][0] = j["objects"][0]["center"][0].get<double>() + 0.5;
  CHECK_THROWS_AS(scene_from_json(j), std::invalid_argument);
}

TEST_CASE("rle round-trips and checks lengths") {
  const std::vector<int> values{1, 1, 1, 2, 2, 0, 0, 0, 0, 7};
  const auto runs = rle_encode(values);
  REQUIRE(runs.size() == 4);
  CHECK(runs[0] == std::pair<int, std::size_t>{1, 3});
  CHECK(rle_decode(runs, values.size()) == values);
  CHECK_THROWS_AS(rle_decode(runs, values.size() + 1), std::invalid_argument);
  CHECK(rle_encode({}).empty());
}

TEST_CASE("scene config json round-trips and honors partial files") {
  SceneConfig cfg = test_config(77);
  cfg.ego = Vec3{1.0, 1.0, 1.0};
  cfg.corruption.label_flip_rate = 0.25;
  cfg.shape_kinds = {ShapeKind::cylinder};
  const SceneConfig back = scene_config_from_json(scene_config_to_json(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.grid == cfg.grid);
  CHECK(back.min_objects == cfg.min_objects);
  CHECK(back.shape_kinds == cfg.shape_kinds);
  CHECK(back.ego == cfg.ego);
  CHECK(back.corruption.label_flip_rate == cfg.corruption.label_flip_rate);

  const SceneConfig partial = scene_config_from_json({{"seed", 9}});
  CHECK(partial.seed == 9);
  CHECK(partial.grid == SceneConfig{}.grid);
  CHECK_THROWS_AS(scene_config_from_json({{"min_objects", -1}}),
                  std::invalid_argument);
}

TEST_CASE("oracle predictions reproduce the ground truth point cloud") {
  const Scene scene = generate_scene(test_config(8));
  int k = 0;
  for (const GroundTruthObject& o : scene.objects)
    k = std::max(k, static_cast<int>(o.voxels.size()));
  const std::vector<ObjectPrediction> preds = oracle_predictions(scene, k + 3);
  REQUIRE(preds.size() == scene.objects.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const GroundTruthObject& gt = scene.objects[i];
    const std::vector<double> probs = class_probabilities(preds[i]);
    CHECK(probs[static_cast<std::size_t>(gt.class_id)] > 0.99);
    const std::vector<Vec3> cloud =
        materialize_point_cloud(preds[i], preds[i].center);
    REQUIRE(cloud.size() == gt.voxel_centers.size());
    for (std::size_t p = 0; p < cloud.size(); ++p)
      CHECK(norm(cloud[p] - gt.voxel_centers[p]) < 1e-12);
  }
  CHECK_THROWS_AS(oracle_predictions(scene, 1), std::invalid_argument);
}

TEST_CASE("perturb_centers shifts only the centers, deterministically") {
  const Scene scene = generate_scene(test_config(6));
  const std::vector<ObjectPrediction> base = oracle_predictions(scene, 70);
  const std::vector<ObjectPrediction> same = perturb_centers(base, 0.0, 1);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(same[i].center == base[i].center);

  const std::vector<ObjectPrediction> a = perturb_centers(base, 0.5, 1);
  const std::vector<ObjectPrediction> b = perturb_centers(base, 0.5, 1);
  const std::vector<ObjectPrediction> c = perturb_centers(base, 0.5, 2);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(a[i].center == b[i].center);
    CHECK(norm(a[i].center - base[i].center) > 0.0);
    CHECK(a[i].offsets == base[i].offsets);
    CHECK(a[i].scores == base[i].scores);
    CHECK(a[i].class_logits == base[i].class_logits);
  }
  bool any_differs = false;
  for (std::size_t i = 0; i < base.size(); ++i)
    if (!(c[i].center == a[i].center)) any_differs = true;
  CHECK(any_differs);
  CHECK_THROWS_AS(perturb_centers(base, -1.0, 0), std::invalid_argument);
}
