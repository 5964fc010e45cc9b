#include "occ/scene.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace occ {

void SceneConfig::validate() const {
  grid.validate();
  if (min_objects < 0 || max_objects < min_objects)
    throw std::invalid_argument("scene config: bad object count range");
  if (shape_kinds.empty())
    throw std::invalid_argument("scene config: no shape kinds");
  if (stuff_layers < 1 || stuff_layers >= grid.dims[2])
    throw std::invalid_argument("scene config: stuff_layers outside grid");
  if (min_extent < 1 || max_extent < min_extent)
    throw std::invalid_argument("scene config: bad extent range");
  if (max_extent > grid.dims[2] - stuff_layers)
    throw std::invalid_argument("scene config: extents taller than free space");
  if (max_object_voxels < 1)
    throw std::invalid_argument("scene config: max_object_voxels < 1");
  if (feature_dim < class_table.size())
    throw std::invalid_argument("scene config: feature_dim below class count");
  if (ego && !grid.contains_point(*ego))
    throw std::invalid_argument("scene config: ego outside grid");
}

Vec3 SceneConfig::resolved_ego() const {
  if (ego) return *ego;
  return {grid.origin.x + 0.5 * grid.voxel_size.x * grid.dims[0],
          grid.origin.y + 0.5 * grid.voxel_size.y * grid.dims[1],
          grid.origin.z + (stuff_layers + 1.5) * grid.voxel_size.z};
}

namespace {

// Voxel footprint of one shape, relative to its min corner, 6-connected by
// construction for every extent >= 1.
std::vector<VoxelIndex> shape_voxels(ShapeKind kind, int ex, int ey, int ez) {
  std::vector<VoxelIndex> out;
  switch (kind) {
    case ShapeKind::box:
      for (int z = 0; z < ez; ++z)
        for (int y = 0; y < ey; ++y)
          for (int x = 0; x < ex; ++x) out.push_back({x, y, z});
      break;
    case ShapeKind::l_shape: {
      // box minus the (+x, +y) quadrant, full height
      const int cx = ex - ex / 2;
      const int cy = ey - ey / 2;
      for (int z = 0; z < ez; ++z)
        for (int y = 0; y < ey; ++y)
          for (int x = 0; x < ex; ++x)
            if (!(x >= cx && y >= cy)) out.push_back({x, y, z});
      break;
    }
    case ShapeKind::cylinder: {
      // circular footprint extruded in z; radius trimmed so corners drop
      const double r = 0.5 * std::max(ex, 1) - 0.1;
      const double c = 0.5 * ex;
      for (int z = 0; z < ez; ++z)
        for (int y = 0; y < ex; ++y)
          for (int x = 0; x < ex; ++x) {
            const double dx = x + 0.5 - c;
            const double dy = y + 0.5 - c;
            if (dx * dx + dy * dy <= r * r + 1e-12) out.push_back({x, y, z});
          }
      break;
    }
  }
  return out;
}

int thing_class_for(const ClassTable& table, ShapeKind kind) {
  const auto& things = table.thing_ids();
  return things[static_cast<std::size_t>(kind) % things.size()];
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  const GridSpec& spec = cfg.grid;
  std::mt19937_64 rng(cfg.seed);

  Scene scene;
  scene.class_table = cfg.class_table;
  scene.semantic = make_semantic_grid(spec);
  scene.ego = cfg.resolved_ego();

  // Ground slab, tiled over the stuff classes by quadrant so several stuff
  // classes appear in metrics.
  const auto& stuff = cfg.class_table.stuff_ids();
  for (int z = 0; z < cfg.stuff_layers; ++z)
    for (int y = 0; y < spec.dims[1]; ++y)
      for (int x = 0; x < spec.dims[0]; ++x) {
        const std::size_t tile = static_cast<std::size_t>(
            (x * 2 / spec.dims[0]) + 2 * (y * 2 / spec.dims[1]));
        scene.semantic.labels.at({x, y, z}) = stuff[tile % stuff.size()];
      }

  const int n_objects =
      std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
  std::unordered_set<VoxelIndex> taken;

  for (int obj = 0; obj < n_objects; ++obj) {
    const ShapeKind kind =
        cfg.shape_kinds[std::uniform_int_distribution<std::size_t>(
            0, cfg.shape_kinds.size() - 1)(rng)];

    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      std::uniform_int_distribution<int> extent(cfg.min_extent, cfg.max_extent);
      const int ex = extent(rng);
      int ey = extent(rng);
      const int ez = extent(rng);
      if (kind == ShapeKind::cylinder) ey = ex;  // square footprint
      std::vector<VoxelIndex> local = shape_voxels(kind, ex, ey, ez);
      if (local.empty() ||
          static_cast<int>(local.size()) > cfg.max_object_voxels)
        continue;

      const int bx = std::uniform_int_distribution<int>(0, spec.dims[0] - ex)(rng);
      const int by = std::uniform_int_distribution<int>(0, spec.dims[1] - ey)(rng);
      const int bz = cfg.stuff_layers;  // objects rest on the ground slab

      std::vector<VoxelIndex> voxels;
      voxels.reserve(local.size());
      bool free = true;
      for (const VoxelIndex& v : local) {
        const VoxelIndex g{v.x + bx, v.y + by, v.z + bz};
        if (!spec.contains(g) || taken.count(g)) {
          free = false;
          break;
        }
        voxels.push_back(g);
      }
      if (!free) continue;

      const int class_id = thing_class_for(cfg.class_table, kind);
      const int instance_id = static_cast<int>(scene.objects.size()) + 1;
      for (const VoxelIndex& v : voxels) {
        taken.insert(v);
        scene.semantic.labels.at(v) = class_id;
      }
      std::sort(voxels.begin(), voxels.end());
      scene.objects.push_back(
          make_ground_truth_object(spec, class_id, std::move(voxels), instance_id));
      placed = true;
    }
    if (!placed)
      throw std::runtime_error("generate_scene: object placement retries exhausted");
  }

  scene.panoptic = make_panoptic_grid(spec);
  scene.panoptic.labels = scene.semantic.labels;
  for (const GroundTruthObject& o : scene.objects)
    for (const VoxelIndex& v : o.voxels)
      scene.panoptic.instance_ids.at(v) = o.instance_id;

  scene.visibility = compute_visibility(scene.semantic, scene.ego);
  for (GroundTruthObject& o : scene.objects) {
    o.visible_voxel_count = 0;
    for (const VoxelIndex& v : o.voxels)
      if (scene.visibility.visible.at(v)) ++o.visible_voxel_count;
  }

  scene.feature_seed = cfg.seed ^ 0x5eedfeedfacef00dull;
  scene.features = build_features(scene.semantic, cfg.feature_dim,
                                  cfg.class_table.size(), scene.feature_seed);
  return scene;
}

FeatureGrid build_features(const SemanticGrid& grid, int dim, int class_count,
                           std::uint64_t seed) {
  if (dim < class_count)
    throw std::invalid_argument("build_features: dim below class count");
  FeatureGrid features;
  features.spec = grid.spec;
  features.dim = dim;
  features.values.assign(grid.labels.size() * static_cast<std::size_t>(dim), 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.25);
  for (std::size_t i = 0; i < grid.labels.size(); ++i) {
    double* f = features.values.data() + i * static_cast<std::size_t>(dim);
    f[grid.labels[i]] = 1.0;
    for (int d = class_count; d < dim; ++d) f[d] = noise(rng);
  }
  return features;
}

SemanticGrid corrupt_baseline(const Scene& scene, const SceneConfig& cfg) {
  SemanticGrid out = scene.semantic;
  const double rate = cfg.corruption.label_flip_rate;
  if (rate <= 0.0) return out;

  const int classes = scene.class_table.size();
  if (classes < 3 && rate > 0.0)
    throw std::invalid_argument("corrupt_baseline: need >= 2 non-empty classes");
  std::mt19937_64 rng(cfg.seed ^ 0xc0ffee5eedull);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> other(1, classes - 2);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const int label = out.labels[i];
    if (label == kEmptyClass) continue;
    if (coin(rng) >= rate) continue;
    // uniform over the non-empty classes distinct from the current label
    int pick = other(rng);
    if (pick >= label) ++pick;
    out.labels[i] = pick;
  }
  return out;
}

std::vector<ObjectPrediction> oracle_predictions(const Scene& scene, int k) {
  std::vector<ObjectPrediction> preds;
  preds.reserve(scene.objects.size());
  for (const GroundTruthObject& gt : scene.objects) {
    if (static_cast<int>(gt.voxels.size()) > k)
      throw std::invalid_argument("oracle_predictions: k below object size");
    ObjectPrediction p;
    p.class_logits.assign(static_cast<std::size_t>(scene.class_table.size()), 0.0);
    p.class_logits[static_cast<std::size_t>(gt.class_id)] = 12.0;
    p.center = gt.center;
    p.offsets.assign(static_cast<std::size_t>(k), Vec3{});
    p.scores.assign(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < gt.voxel_centers.size(); ++i) {
      p.offsets[i] = gt.voxel_centers[i] - gt.center;
      p.scores[i] = 1.0;
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

std::vector<ObjectPrediction> perturb_centers(std::vector<ObjectPrediction> preds,
                                              double sigma, std::uint64_t seed) {
  if (sigma < 0.0)
    throw std::invalid_argument("perturb_centers: negative sigma");
  if (sigma == 0.0) return preds;
  std::mt19937_64 rng(seed ^ 0x6e015e5eedull);
  std::normal_distribution<double> noise(0.0, sigma);
  for (ObjectPrediction& p : preds) {
    p.center.x += noise(rng);
    p.center.y += noise(rng);
    p.center.z += noise(rng);
  }
  return preds;
}

}  // namespace occ
