#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "occ/autodiff.hpp"
#include "occ/loss_types.hpp"
#include "occ/matching.hpp"
#include "occ/objects.hpp"

// Training objective over matched predictions. Templated on the scalar so
// the same arithmetic serves the differentiable path (ad::Var) and plain
// evaluation (double); the assignments themselves are always computed on
// plain values and enter the loss as constants.

namespace occ {

template <class T>
T safe_norm(const Vec3T<T>& v) {
  using std::sqrt;
  // 1e-24 keeps the gradient finite (and zero) at exact coincidence; the
  // value bias is <= 1e-12, far below every tolerance used downstream.
  return sqrt(squared_norm(v) + 1e-24);
}

// -alpha_t * (1 - p_t)^gamma * log(p_t) with p_t = p for target 1 and
// 1 - p for target 0; p_t is clamped to [epsilon, 1 - epsilon].
template <class T>
T focal_loss(const T& p, int target, const FocalParams& fp = {}) {
  using std::log;
  using std::pow;
  T pt = target ? p : T(1.0) - p;
  pt = clamp_value(pt, fp.epsilon, 1.0 - fp.epsilon);
  const double alpha_t = target ? fp.alpha : 1.0 - fp.alpha;
  return -alpha_t * pow(T(1.0) - pt, fp.gamma) * log(pt);
}

template <class T>
struct DetectionTerms {
  T l_cls;        // mean focal classification over all predictions
  T l_dist_center;  // mean center distance over matched predictions
  T total;        // lambda1 * l_cls + lambda2 * l_dist_center
};

// Classification target is the matched object's class, or the empty class
// for unmatched predictions.
template <class T>
DetectionTerms<T> detection_loss(const std::vector<ObjectPredictionT<T>>& preds,
                                 const std::vector<GroundTruthObject>& gts,
                                 const std::vector<int>& sigma_det,
                                 const LossWeights& w, const FocalParams& fp = {}) {
  if (sigma_det.size() != preds.size())
    throw std::invalid_argument("detection_loss: sigma size mismatch");
  T cls_sum = T(0.0);
  T dist_sum = T(0.0);
  int matched = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::vector<T> probs = softmax(preds[i].class_logits);
    const int j = sigma_det[i];
    const int target_class = j >= 0 ? gts[static_cast<std::size_t>(j)].class_id : kEmptyClass;
    cls_sum = cls_sum + focal_loss(probs[static_cast<std::size_t>(target_class)], 1, fp);
    if (j >= 0) {
      const Vec3T<T> diff =
          preds[i].center - to_vec3<T>(gts[static_cast<std::size_t>(j)].center);
      dist_sum = dist_sum + safe_norm(diff);
      ++matched;
    }
  }
  DetectionTerms<T> terms;
  terms.l_cls = preds.empty() ? T(0.0) : cls_sum / static_cast<double>(preds.size());
  terms.l_dist_center = matched > 0 ? dist_sum / static_cast<double>(matched) : T(0.0);
  terms.total = w.lambda1 * terms.l_cls + w.lambda2 * terms.l_dist_center;
  return terms;
}

template <class T>
struct OccupancyTerms {
  T l_focal;  // mean score objective over all K candidates
  T l_dist;   // mean candidate-to-target distance over matched candidates
  T total;    // lambda3 * l_focal + lambda4 * l_dist
};

// Score target is 1 for candidates matched to a real voxel, 0 otherwise.
// In decoupled mode the candidates anchor at the ground-truth center, so the
// result is independent of the predicted center by construction.
template <class T>
OccupancyTerms<T> occupancy_loss(const ObjectPredictionT<T>& pred,
                                 const GroundTruthObject& gt,
                                 const std::vector<int>& sigma_occ,
                                 AnchorMode mode, const LossWeights& w,
                                 OccupancyForm form = OccupancyForm::focal,
                                 const FocalParams& fp = {}) {
  const std::size_t k = pred.offsets.size();
  if (sigma_occ.size() != k || pred.scores.size() != k)
    throw std::invalid_argument("occupancy_loss: size mismatch");
  if (k == 0) return {T(0.0), T(0.0), T(0.0)};

  const Vec3T<T> anchor =
      mode == AnchorMode::decoupled ? to_vec3<T>(gt.center) : pred.center;
  T focal_sum = T(0.0);
  T dist_sum = T(0.0);
  int matched = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const bool hit = sigma_occ[i] >= 0;
    if (form == OccupancyForm::focal) {
      focal_sum = focal_sum + focal_loss(pred.scores[i], hit ? 1 : 0, fp);
    } else {
      using std::log;
      focal_sum = focal_sum - log(clamp_value(pred.scores[i], fp.epsilon, 1.0));
    }
    if (hit) {
      const Vec3 target = gt.voxel_centers[static_cast<std::size_t>(sigma_occ[i])];
      dist_sum = dist_sum + safe_norm(anchor + pred.offsets[i] - to_vec3<T>(target));
      ++matched;
    }
  }
  OccupancyTerms<T> terms;
  terms.l_focal = focal_sum / static_cast<double>(k);
  terms.l_dist = matched > 0 ? dist_sum / static_cast<double>(matched) : T(0.0);
  terms.total = w.lambda3 * terms.l_focal + w.lambda4 * terms.l_dist;
  return terms;
}

template <class T>
struct ObjectsLossResultT {
  T total;
  LossBreakdown breakdown;
  MatchResult match;
};

using ObjectsLossResult = ObjectsLossResultT<ad::Var>;

// Loss under a fixed matching; used both by objects_loss below and by
// finite-difference checks, which must hold the assignment constant.
template <class T>
ObjectsLossResultT<T> objects_loss_with_match(
    const std::vector<ObjectPredictionT<T>>& preds,
    const std::vector<GroundTruthObject>& gts, const MatchResult& match,
    const LossWeights& w, AnchorMode mode,
    OccupancyForm form = OccupancyForm::focal, const FocalParams& fp = {}) {
  const DetectionTerms<T> det = detection_loss(preds, gts, match.sigma_det, w, fp);

  T occ_focal_sum = T(0.0);
  T occ_dist_sum = T(0.0);
  int matched_objects = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int j = match.sigma_det[i];
    if (j < 0) continue;
    const OccupancyTerms<T> occ =
        occupancy_loss(preds[i], gts[static_cast<std::size_t>(j)], match.sigma_occ[i],
                       mode, w, form, fp);
    occ_focal_sum = occ_focal_sum + occ.l_focal;
    occ_dist_sum = occ_dist_sum + occ.l_dist;
    ++matched_objects;
  }
  const T l_focal_occ =
      matched_objects > 0 ? occ_focal_sum / static_cast<double>(matched_objects) : T(0.0);
  const T l_dist_offsets =
      matched_objects > 0 ? occ_dist_sum / static_cast<double>(matched_objects) : T(0.0);

  ObjectsLossResultT<T> result;
  result.match = match;
  const T l_det = det.total;
  const T l_occ = w.lambda3 * l_focal_occ + w.lambda4 * l_dist_offsets;
  result.total = l_det + l_occ;

  LossBreakdown& b = result.breakdown;
  b.l_cls = value_of(det.l_cls);
  b.l_dist_center = value_of(det.l_dist_center);
  b.l_focal_occ = value_of(l_focal_occ);
  b.l_dist_offsets = value_of(l_dist_offsets);
  b.l_det = value_of(l_det);
  b.l_occ = value_of(l_occ);
  b.l_objects = value_of(result.total);
  return result;
}

// Full objective: Hungarian matching on the current values, then the
// detection and occupancy terms under that (constant) assignment.
template <class T>
ObjectsLossResultT<T> objects_loss(const std::vector<ObjectPredictionT<T>>& preds,
                                   const std::vector<GroundTruthObject>& gts,
                                   const LossWeights& w, AnchorMode mode,
                                   OccupancyForm form = OccupancyForm::focal,
                                   const FocalParams& fp = {}) {
  std::vector<ObjectPrediction> values;
  values.reserve(preds.size());
  for (const auto& p : preds) values.push_back(prediction_values(p));
  const MatchResult match = match_all(values, gts, w, mode);
  return objects_loss_with_match(preds, gts, match, w, mode, form, fp);
}

}  // namespace occ
