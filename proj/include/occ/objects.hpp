#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "occ/autodiff.hpp"
#include "occ/classes.hpp"
#include "occ/grid.hpp"

namespace occ {

// One query's output: a class distribution (as raw logits), a center, and K
// offset candidates with occupancy scores in [0, 1]. The point cloud of the
// prediction is { anchor + offsets[k] : scores[k] >= 0.5 }.
template <class T>
struct ObjectPredictionT {
  std::vector<T> class_logits;
  Vec3T<T> center;
  std::vector<Vec3T<T>> offsets;
  std::vector<T> scores;
};

using ObjectPrediction = ObjectPredictionT<double>;

inline constexpr double kScoreThreshold = 0.5;  // inclusive

template <class T>
ObjectPrediction prediction_values(const ObjectPredictionT<T>& p) {
  ObjectPrediction out;
  out.class_logits.reserve(p.class_logits.size());
  for (const T& l : p.class_logits) out.class_logits.push_back(value_of(l));
  out.center = {value_of(p.center.x), value_of(p.center.y), value_of(p.center.z)};
  out.offsets.reserve(p.offsets.size());
  for (const auto& o : p.offsets)
    out.offsets.push_back({value_of(o.x), value_of(o.y), value_of(o.z)});
  out.scores.reserve(p.scores.size());
  for (const T& s : p.scores) out.scores.push_back(value_of(s));
  return out;
}

// Stable softmax; the max shift is a constant, which leaves both the values
// and the derivatives unchanged.
template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (const T& l : logits) m = std::max(m, value_of(l));
  std::vector<T> e;
  e.reserve(logits.size());
  T sum = T(0.0);
  for (const T& l : logits) {
    using std::exp;
    e.push_back(exp(l - m));
    sum = sum + e.back();
  }
  for (T& v : e) v = v / sum;
  return e;
}

inline std::vector<double> class_probabilities(const ObjectPrediction& p) {
  return softmax(p.class_logits);
}

struct GroundTruthObject {
  int class_id = 0;
  Vec3 center{};  // centroid of voxel_centers
  std::vector<VoxelIndex> voxels;
  std::vector<Vec3> voxel_centers;
  int instance_id = 0;
  int visible_voxel_count = 0;
};

// Fills voxel_centers and the centroid from the voxel list; throws on an
// empty list or out-of-range voxels.
GroundTruthObject make_ground_truth_object(const GridSpec& spec, int class_id,
                                           std::vector<VoxelIndex> voxels,
                                           int instance_id,
                                           int visible_voxel_count = 0);

// Offset candidates that clear the score threshold, anchored at `anchor`.
std::vector<Vec3> materialize_point_cloud(const ObjectPrediction& pred,
                                          const Vec3& anchor);

struct InstanceMap {
  GridSpec spec;
  Grid3<int> ids;  // -1 = no instance
};

// Writes each kept prediction's point cloud into a voxel map under instance
// id (prediction index + 1). Dropped: predictions whose argmax class is the
// empty class, or whose best thing-class probability is below
// class_threshold. Voxel collisions keep the higher offset score, then the
// lower id.
InstanceMap rasterize_instances(std::span<const ObjectPrediction> preds,
                                const GridSpec& spec, const ClassTable& classes,
                                double class_threshold = 0.5);

// Objects with at least one visible voxel; order preserved.
std::vector<GroundTruthObject> filter_trainable(
    std::span<const GroundTruthObject> objects);

}  // namespace occ
