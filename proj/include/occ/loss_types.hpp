#pragma once

namespace occ {

// Term weights shared by matching costs and the training loss.
struct LossWeights {
  double lambda1 = 0.5;     // classification
  double lambda2 = 0.02;    // center distance
  double lambda3 = 0.125;   // occupancy score
  double lambda4 = 0.0125;  // offset distance
};

// During training the offsets can be anchored at the matched ground-truth
// center (decoupled) instead of the predicted center (coupled), which keeps
// center error out of the shape objective.
enum class AnchorMode { decoupled, coupled };

// Occupancy score objective: focal on matched/unmatched targets, or the
// plain negative log score summed over all candidates.
enum class OccupancyForm { focal, log_score };

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
  double epsilon = 1e-7;  // probability clamp, keeps log() finite
};

// Scalar view of one training step. The unweighted component means come
// first; the weighted sums satisfy
//   l_det = lambda1 * l_cls + lambda2 * l_dist_center
//   l_occ = lambda3 * l_focal_occ + lambda4 * l_dist_offsets
//   l_objects = l_det + l_occ.
struct LossBreakdown {
  double l_cls = 0.0;
  double l_dist_center = 0.0;
  double l_focal_occ = 0.0;
  double l_dist_offsets = 0.0;
  double l_det = 0.0;
  double l_occ = 0.0;
  double l_objects = 0.0;
};

}  // namespace occ
