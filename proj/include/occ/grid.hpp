#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "occ/classes.hpp"
#include "occ/geometry.hpp"

namespace occ {

// Axis-aligned voxel grid: world box [origin, origin + dims * voxel_size),
// cell (i,j,k) covering origin + [i,i+1) * voxel_size per axis.
struct GridSpec {
  Vec3 origin{};
  Vec3 voxel_size{0.4, 0.4, 0.4};
  std::array<int, 3> dims{1, 1, 1};

  void validate() const;  // throws std::invalid_argument
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  bool contains(const VoxelIndex& v) const {
    return v.x >= 0 && v.x < dims[0] && v.y >= 0 && v.y < dims[1] && v.z >= 0 &&
           v.z < dims[2];
  }
  bool contains_point(const Vec3& p) const;
  // Flat storage order: x fastest, then y, then z.
  std::size_t flat_index(const VoxelIndex& v) const {
    return static_cast<std::size_t>(v.x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(v.y) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(v.z));
  }
  VoxelIndex index_from_flat(std::size_t flat) const {
    const int x = static_cast<int>(flat % static_cast<std::size_t>(dims[0]));
    flat /= static_cast<std::size_t>(dims[0]);
    const int y = static_cast<int>(flat % static_cast<std::size_t>(dims[1]));
    const int z = static_cast<int>(flat / static_cast<std::size_t>(dims[1]));
    return {x, y, z};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Desk-scale default: 50x50x8 cells of 0.4 m starting at (-10, -10, -1.6).
GridSpec default_grid_spec();

template <class T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(const std::array<int, 3>& dims, T fill = T{})
      : dims_(dims),
        data_(static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
                  static_cast<std::size_t>(dims[2]),
              fill) {}

  T& at(const VoxelIndex& v) { return data_[flat(v)]; }
  const T& at(const VoxelIndex& v) const { return data_[flat(v)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return data_.size(); }
  const std::array<int, 3>& dims() const { return dims_; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  std::size_t flat(const VoxelIndex& v) const {
    return static_cast<std::size_t>(v.x) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(v.y) +
                static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(v.z));
  }
  std::array<int, 3> dims_{0, 0, 0};
  std::vector<T> data_;
};

struct SemanticGrid {
  GridSpec spec;
  Grid3<int> labels;  // class ids, kEmptyClass = free space
};

// Semantic labels plus optional instance ids (-1 = none).
struct PanopticGrid {
  GridSpec spec;
  Grid3<int> labels;
  Grid3<int> instance_ids;
};

struct VisibilityMask {
  GridSpec spec;
  Grid3<std::uint8_t> visible;
};

SemanticGrid make_semantic_grid(const GridSpec& spec, int fill = kEmptyClass);
PanopticGrid make_panoptic_grid(const GridSpec& spec, int fill = kEmptyClass);

// Instance-id consistency issues of a panoptic grid, empty when clean:
// an id on an empty/stuff voxel, or one id spanning several classes.
std::vector<std::string> validate_panoptic(const PanopticGrid& grid,
                                           const ClassTable& classes);

// Voxel containing p, or nullopt when p lies outside the grid box.
// Points exactly on the max face are outside (half-open cells).
std::optional<VoxelIndex> world_to_voxel(const GridSpec& spec, const Vec3& p);

// World-space center of a cell; throws std::out_of_range for bad indices.
Vec3 voxel_center(const GridSpec& spec, const VoxelIndex& v);

struct VoxelizeResult {
  std::vector<VoxelIndex> voxels;  // deduplicated, sorted
  int dropped = 0;                 // points outside the grid
};

VoxelizeResult voxelize_points(const GridSpec& spec, std::span<const Vec3> points);

// Line-of-sight visibility from a single viewpoint. A voxel is visible when
// no voxel strictly earlier on the ray from `ego` to its center is occupied;
// the first occupied voxel along a ray is therefore visible itself.
// `ego` must lie inside the grid box.
VisibilityMask compute_visibility(const SemanticGrid& grid, const Vec3& ego);

}  // namespace occ
