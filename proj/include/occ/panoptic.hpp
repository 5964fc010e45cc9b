#pragma once

#include "occ/classes.hpp"
#include "occ/grid.hpp"
#include "occ/objects.hpp"

namespace occ {

struct PanopticConfig {
  int radius = 9;  // Manhattan voting radius, 0 = direct lookup
};

// Attaches instance ids from `instances` onto the baseline semantic grid.
// Stuff and empty voxels are copied unchanged. Every thing voxel collects
// the instance ids within the Manhattan ball of the configured radius and
// keeps the majority id (ties: nearest carrying voxel, then smaller id);
// thing voxels that find no id become empty. All grids must share one spec.
PanopticGrid merge_panoptic(const SemanticGrid& baseline,
                            const InstanceMap& instances,
                            const ClassTable& classes,
                            const PanopticConfig& cfg = {});

}  // namespace occ
