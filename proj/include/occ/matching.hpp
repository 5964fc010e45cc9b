#pragma once

#include <optional>
#include <span>
#include <vector>

#include "occ/loss_types.hpp"
#include "occ/objects.hpp"

namespace occ {

struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major

  CostMatrix() = default;
  CostMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}
  double& at(int r, int c) {
    return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
  }
  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
  }
};

struct Assignment {
  std::vector<int> row_to_col;  // size rows, each in [0, cols)
  double total_cost = 0.0;
};

// Minimum-cost assignment of every row to a distinct column (rows <= cols),
// Jonker-Volgenant style shortest augmenting paths in O(rows^2 * cols).
// Deterministic: cost ties resolve toward the lowest column index. Throws
// std::invalid_argument for rows > cols or non-finite entries.
Assignment hungarian_solve(const CostMatrix& costs);

// lambda1 * (-p(gt class)) + lambda2 * ||pred center - gt center||.
double object_match_cost(const ObjectPrediction& pred, const GroundTruthObject& gt,
                         const LossWeights& w);

// Prediction index -> ground truth index, -1 for background. Every ground
// truth object is assigned; requires preds.size() >= gts.size(). Padding
// columns (background) cost 0.
std::vector<int> match_objects(std::span<const ObjectPrediction> preds,
                               std::span<const GroundTruthObject> gts,
                               const LossWeights& w);

// -score + ||candidate - target|| against a real target, 0 against padding.
double voxel_match_cost(const Vec3& candidate, double score,
                        const std::optional<Vec3>& target);

// Offset slot -> index into gt.voxel_centers, -1 for the padded no-target
// column. All offsets participate regardless of score. The candidate points
// are anchor + offsets[k]; requires K >= |gt.voxels|.
std::vector<int> match_voxels(const ObjectPrediction& pred,
                              const GroundTruthObject& gt, const Vec3& anchor);

struct MatchResult {
  std::vector<int> sigma_det;              // per prediction, -1 = background
  std::vector<std::vector<int>> sigma_occ; // per prediction, empty when unmatched
  double total_cost = 0.0;                 // object-level assignment cost
};

// Object-level matching plus a voxel-level matching for every matched pair.
// The anchor for voxel matching follows `mode` (ground truth center when
// decoupled, predicted center when coupled).
MatchResult match_all(std::span<const ObjectPrediction> preds,
                      std::span<const GroundTruthObject> gts,
                      const LossWeights& w, AnchorMode mode);

}  // namespace occ
