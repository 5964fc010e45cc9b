#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "occ/classes.hpp"
#include "occ/grid.hpp"
#include "occ/objects.hpp"

namespace occ {

enum class ShapeKind { box, l_shape, cylinder };

struct CorruptionConfig {
  double label_flip_rate = 0.0;    // per non-empty voxel, flip to another class
  double center_noise_sigma = 0.0; // per-axis Gaussian on prediction centers
};

struct SceneConfig {
  std::uint64_t seed = 0;
  GridSpec grid = default_grid_spec();
  ClassTable class_table;
  int min_objects = 1;
  int max_objects = 4;
  std::vector<ShapeKind> shape_kinds = {ShapeKind::box, ShapeKind::l_shape,
                                        ShapeKind::cylinder};
  int stuff_layers = 1;   // ground thickness in voxels
  int min_extent = 2;     // per-axis shape extent in voxels
  int max_extent = 4;
  int max_object_voxels = 125;
  int feature_dim = 32;
  std::optional<Vec3> ego;  // default: grid center, 1.5 voxels above ground
  CorruptionConfig corruption;

  void validate() const;  // throws std::invalid_argument
  Vec3 resolved_ego() const;
};

// Per-voxel feature vectors, one-hot class followed by Gaussian noise dims.
struct FeatureGrid {
  GridSpec spec;
  int dim = 0;
  std::vector<double> values;  // voxel-major, x fastest

  std::span<const double> at(const VoxelIndex& v) const {
    const std::size_t base = spec.flat_index(v) * static_cast<std::size_t>(dim);
    return {values.data() + base, static_cast<std::size_t>(dim)};
  }
};

struct Scene {
  SemanticGrid semantic;
  PanopticGrid panoptic;
  std::vector<GroundTruthObject> objects;
  VisibilityMask visibility;
  FeatureGrid features;
  Vec3 ego{};
  ClassTable class_table;
  std::uint64_t feature_seed = 0;
};

// Deterministic synthetic scene: a stuff ground slab plus non-overlapping,
// 6-connected thing shapes with instance ids 1..n in placement order.
// Throws std::runtime_error when placement retries are exhausted.
Scene generate_scene(const SceneConfig& cfg);

// Same labels/noise for the same inputs; shared by generation and loading.
FeatureGrid build_features(const SemanticGrid& grid, int dim, int class_count,
                           std::uint64_t seed);

// Copy of the scene's semantic grid with each non-empty voxel's label
// flipped, with probability cfg.corruption.label_flip_rate, to a uniformly
// random other non-empty class. Deterministic in cfg.seed.
SemanticGrid corrupt_baseline(const Scene& scene, const SceneConfig& cfg);

// One perfect prediction per ground-truth object, padded to k offset slots
// (scores 1 on real voxels, 0 on padding). Requires k >= every object size.
std::vector<ObjectPrediction> oracle_predictions(const Scene& scene, int k);

// Adds zero-mean Gaussian noise (std sigma per axis) to every prediction
// center, simulating localization error. Deterministic in seed; sigma = 0
// returns the predictions unchanged.
std::vector<ObjectPrediction> perturb_centers(std::vector<ObjectPrediction> preds,
                                              double sigma, std::uint64_t seed);

}  // namespace occ
