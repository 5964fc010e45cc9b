#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "occ/classes.hpp"
#include "occ/grid.hpp"

namespace occ {

// Occupied-vs-free IoU over non-empty labels; 1.0 when both grids are empty.
// With a mask, only visible voxels participate.
double binary_iou(const SemanticGrid& pred, const SemanticGrid& gt,
                  const VisibilityMask* mask = nullptr);

struct MeanIouResult {
  std::map<int, double> per_class;  // classes present in either grid
  double miou = 1.0;                // mean over present classes
};

// Per-class IoU over non-empty classes. Classes absent from both grids are
// excluded by default; include_absent_classes counts them as 0 instead.
MeanIouResult mean_iou(const SemanticGrid& pred, const SemanticGrid& gt,
                       const VisibilityMask* mask = nullptr,
                       bool include_absent_classes = false);

struct PQClassStats {
  double pq = 0.0;
  double sq = 0.0;  // mean matched IoU; 0 without matches
  double rq = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double iou_sum = 0.0;
};

struct PQReport {
  std::map<int, PQClassStats> per_class;
  // Macro means over classes with any segment; sq is pq/rq so the identity
  // pq == sq * rq carries over to the aggregates.
  double pq = 0.0, rq = 0.0, sq = 0.0;
  double pq_things = 0.0, rq_things = 0.0, sq_things = 0.0;
  double pq_stuff = 0.0, rq_stuff = 0.0, sq_stuff = 0.0;
};

// Segment-level panoptic quality. Segments are (class, instance id) groups
// for thing classes and one segment per present stuff class; a pair counts
// as true positive iff IoU > 0.5 (strict), which makes the match unique.
PQReport panoptic_quality(const PanopticGrid& pred, const PanopticGrid& gt,
                          const ClassTable& classes);

struct EvalReport {
  double iou = 0.0;
  double miou = 0.0;
  std::map<int, double> per_class_iou;
  double pq = 0.0, rq = 0.0, sq = 0.0;
  double pq_things = 0.0, rq_things = 0.0, sq_things = 0.0;
  double pq_stuff = 0.0, rq_stuff = 0.0, sq_stuff = 0.0;
  bool masked = false;  // whether iou/miou used the visibility mask
};

// Semantic metrics under the chosen masking; panoptic quality is always
// computed over the full grid.
EvalReport evaluate_grids(const SemanticGrid& pred_sem, const SemanticGrid& gt_sem,
                          const PanopticGrid& pred_pan, const PanopticGrid& gt_pan,
                          const ClassTable& classes, const VisibilityMask* mask);

nlohmann::json eval_report_to_json(const EvalReport& report);
std::string eval_report_csv_header();
std::string eval_report_csv_row(const EvalReport& report);

}  // namespace occ
