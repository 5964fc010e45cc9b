#include "occ/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace occ {

void GridSpec::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (dims[static_cast<std::size_t>(d)] <= 0)
      throw std::invalid_argument("grid spec: dims must be positive");
  }
  if (!(voxel_size.x > 0.0) || !(voxel_size.y > 0.0) || !(voxel_size.z > 0.0))
    throw std::invalid_argument("grid spec: voxel_size must be positive");
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z))
    throw std::invalid_argument("grid spec: origin must be finite");
}

bool GridSpec::contains_point(const Vec3& p) const {
  const Vec3 ext{voxel_size.x * dims[0], voxel_size.y * dims[1],
                 voxel_size.z * dims[2]};
  return p.x >= origin.x && p.x < origin.x + ext.x && p.y >= origin.y &&
         p.y < origin.y + ext.y && p.z >= origin.z && p.z < origin.z + ext.z;
}

GridSpec default_grid_spec() {
  GridSpec spec;
  spec.origin = {-10.0, -10.0, -1.6};
  spec.voxel_size = {0.4, 0.4, 0.4};
  spec.dims = {50, 50, 8};
  return spec;
}

SemanticGrid make_semantic_grid(const GridSpec& spec, int fill) {
  spec.validate();
  return SemanticGrid{spec, Grid3<int>(spec.dims, fill)};
}

PanopticGrid make_panoptic_grid(const GridSpec& spec, int fill) {
  spec.validate();
  return PanopticGrid{spec, Grid3<int>(spec.dims, fill), Grid3<int>(spec.dims, -1)};
}

std::vector<std::string> validate_panoptic(const PanopticGrid& grid,
                                           const ClassTable& classes) {
  std::vector<std::string> issues;
  std::map<int, int> id_class;
  for (std::size_t i = 0; i < grid.labels.size(); ++i) {
    const int id = grid.instance_ids[i];
    if (id < 0) continue;
    const int label = grid.labels[i];
    if (!classes.is_thing(label)) {
      issues.push_back("instance id " + std::to_string(id) +
                       " on non-thing class " + std::to_string(label));
      continue;
    }
    auto [it, inserted] = id_class.emplace(id, label);
    if (!inserted && it->second != label)
      issues.push_back("instance id " + std::to_string(id) + " spans classes " +
                       std::to_string(it->second) + " and " + std::to_string(label));
  }
  return issues;
}

std::optional<VoxelIndex> world_to_voxel(const GridSpec& spec, const Vec3& p) {
  const VoxelIndex v{
      static_cast<int>(std::floor((p.x - spec.origin.x) / spec.voxel_size.x)),
      static_cast<int>(std::floor((p.y - spec.origin.y) / spec.voxel_size.y)),
      static_cast<int>(std::floor((p.z - spec.origin.z) / spec.voxel_size.z))};
  if (!spec.contains(v)) return std::nullopt;
  return v;
}

Vec3 voxel_center(const GridSpec& spec, const VoxelIndex& v) {
  if (!spec.contains(v))
    throw std::out_of_range("voxel_center: index outside grid");
  return {spec.origin.x + (v.x + 0.5) * spec.voxel_size.x,
          spec.origin.y + (v.y + 0.5) * spec.voxel_size.y,
          spec.origin.z + (v.z + 0.5) * spec.voxel_size.z};
}

VoxelizeResult voxelize_points(const GridSpec& spec, std::span<const Vec3> points) {
  VoxelizeResult result;
  result.voxels.reserve(points.size());
  for (const Vec3& p : points) {
    if (auto v = world_to_voxel(spec, p))
      result.voxels.push_back(*v);
    else
      ++result.dropped;
  }
  std::sort(result.voxels.begin(), result.voxels.end());
  result.voxels.erase(std::unique(result.voxels.begin(), result.voxels.end()),
                      result.voxels.end());
  return result;
}

namespace {

// Amanatides & Woo, "A Fast Voxel Traversal Algorithm for Ray Tracing".
// Walks the cells between `start` (ego, grid units: boundaries at integers)
// and the center of `target`; returns false if an occupied cell other than
// the target lies on the way, target itself excluded.
bool ray_clear(const Grid3<int>& labels, const std::array<int, 3>& dims,
               const Vec3& start, const VoxelIndex& start_voxel,
               const VoxelIndex& target) {
  VoxelIndex cur = start_voxel;
  if (cur == target) return true;
  if (labels.at(cur) != kEmptyClass) return false;

  const double inf = std::numeric_limits<double>::infinity();
  const Vec3 end{target.x + 0.5, target.y + 0.5, target.z + 0.5};
  const double d[3] = {end.x - start.x, end.y - start.y, end.z - start.z};
  const double s[3] = {start.x, start.y, start.z};
  int step[3];
  double t_max[3];
  double t_delta[3];
  int pos[3] = {cur.x, cur.y, cur.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (std::floor(s[a]) + 1.0 - s[a]) / d[a];
      t_delta[a] = 1.0 / d[a];
    } else if (d[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (s[a] - std::floor(s[a])) / -d[a];
      t_delta[a] = -1.0 / d[a];
    } else {
      step[a] = 0;
      t_max[a] = inf;
      t_delta[a] = inf;
    }
  }

  const int max_steps = dims[0] + dims[1] + dims[2] + 3;
  for (int i = 0; i < max_steps; ++i) {
    int a = 0;  // tie order x, y, z keeps the walk deterministic
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    pos[a] += step[a];
    t_max[a] += t_delta[a];
    const VoxelIndex v{pos[0], pos[1], pos[2]};
    if (v == target) return true;
    if (v.x < 0 || v.x >= dims[0] || v.y < 0 || v.y >= dims[1] || v.z < 0 ||
        v.z >= dims[2])
      return true;  // numeric edge: walked past the target without landing on it
    if (labels.at(v) != kEmptyClass) return false;
  }
  return true;
}

}  // namespace

VisibilityMask compute_visibility(const SemanticGrid& grid, const Vec3& ego) {
  grid.spec.validate();
  if (!grid.spec.contains_point(ego))
    throw std::invalid_argument("compute_visibility: ego outside grid");

  const GridSpec& spec = grid.spec;
  const Vec3 start{(ego.x - spec.origin.x) / spec.voxel_size.x,
                   (ego.y - spec.origin.y) / spec.voxel_size.y,
                   (ego.z - spec.origin.z) / spec.voxel_size.z};
  const VoxelIndex start_voxel = *world_to_voxel(spec, ego);

  VisibilityMask mask{spec, Grid3<std::uint8_t>(spec.dims, 0)};
  for (int z = 0; z < spec.dims[2]; ++z)
    for (int y = 0; y < spec.dims[1]; ++y)
      for (int x = 0; x < spec.dims[0]; ++x) {
        const VoxelIndex v{x, y, z};
        mask.visible.at(v) =
            ray_clear(grid.labels, spec.dims, start, start_voxel, v) ? 1 : 0;
      }
  return mask;
}

}  // namespace occ
