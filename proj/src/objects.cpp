#include "occ/objects.hpp"

#include <limits>
#include <stdexcept>

namespace occ {

GroundTruthObject make_ground_truth_object(const GridSpec& spec, int class_id,
                                           std::vector<VoxelIndex> voxels,
                                           int instance_id,
                                           int visible_voxel_count) {
  if (voxels.empty())
    throw std::invalid_argument("ground truth object: empty voxel set");
  GroundTruthObject obj;
  obj.class_id = class_id;
  obj.instance_id = instance_id;
  obj.visible_voxel_count = visible_voxel_count;
  obj.voxels = std::move(voxels);
  obj.voxel_centers.reserve(obj.voxels.size());
  Vec3 sum{};
  for (const VoxelIndex& v : obj.voxels) {
    if (!spec.contains(v))
      throw std::invalid_argument("ground truth object: voxel outside grid");
    const Vec3 c = voxel_center(spec, v);
    obj.voxel_centers.push_back(c);
    sum = sum + c;
  }
  obj.center = sum * (1.0 / static_cast<double>(obj.voxels.size()));
  return obj;
}

std::vector<Vec3> materialize_point_cloud(const ObjectPrediction& pred,
                                          const Vec3& anchor) {
  if (pred.offsets.size() != pred.scores.size())
    throw std::invalid_argument("prediction: offsets/scores size mismatch");
  std::vector<Vec3> points;
  for (std::size_t k = 0; k < pred.offsets.size(); ++k) {
    if (pred.scores[k] >= kScoreThreshold)
      points.push_back(anchor + pred.offsets[k]);
  }
  return points;
}

InstanceMap rasterize_instances(std::span<const ObjectPrediction> preds,
                                const GridSpec& spec, const ClassTable& classes,
                                double class_threshold) {
  spec.validate();
  InstanceMap map{spec, Grid3<int>(spec.dims, -1)};
  Grid3<double> best(spec.dims, -std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ObjectPrediction& pred = preds[i];
    const std::vector<double> probs = class_probabilities(pred);
    int argmax = 0;
    for (int c = 1; c < static_cast<int>(probs.size()); ++c)
      if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(argmax)])
        argmax = c;
    if (argmax == kEmptyClass) continue;
    double best_thing = 0.0;
    for (int c : classes.thing_ids())
      if (c < static_cast<int>(probs.size()))
        best_thing = std::max(best_thing, probs[static_cast<std::size_t>(c)]);
    if (best_thing < class_threshold) continue;

    const int id = static_cast<int>(i) + 1;
    for (std::size_t k = 0; k < pred.offsets.size(); ++k) {
      if (pred.scores[k] < kScoreThreshold) continue;
      const auto v = world_to_voxel(spec, pred.center + pred.offsets[k]);
      if (!v) continue;
      // strict >: on equal scores the earlier (lower-id) writer stays
      if (pred.scores[k] > best.at(*v)) {
        best.at(*v) = pred.scores[k];
        map.ids.at(*v) = id;
      }
    }
  }
  return map;
}

std::vector<GroundTruthObject> filter_trainable(
    std::span<const GroundTruthObject> objects) {
  std::vector<GroundTruthObject> kept;
  for (const GroundTruthObject& o : objects)
    if (o.visible_voxel_count >= 1) kept.push_back(o);
  return kept;
}

}  // namespace occ
