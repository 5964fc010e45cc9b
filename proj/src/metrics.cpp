#include "occ/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace occ {

namespace {

void require_same_spec(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid spec mismatch");
}

double iou_or(double inter, double uni, double when_empty) {
  return uni > 0.0 ? inter / uni : when_empty;
}

}  // namespace

double binary_iou(const SemanticGrid& pred, const SemanticGrid& gt,
                  const VisibilityMask* mask) {
  require_same_spec(pred.spec, gt.spec, "binary_iou");
  if (mask) require_same_spec(pred.spec, mask->spec, "binary_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    if (mask && !mask->visible[i]) continue;
    const bool p = pred.labels[i] != kEmptyClass;
    const bool g = gt.labels[i] != kEmptyClass;
    inter += p && g;
    uni += p || g;
  }
  return iou_or(static_cast<double>(inter), static_cast<double>(uni), 1.0);
}

MeanIouResult mean_iou(const SemanticGrid& pred, const SemanticGrid& gt,
                       const VisibilityMask* mask, bool include_absent_classes) {
  require_same_spec(pred.spec, gt.spec, "mean_iou");
  if (mask) require_same_spec(pred.spec, mask->spec, "mean_iou");

  std::map<int, std::size_t> inter, pred_count, gt_count;
  int max_class = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    if (mask && !mask->visible[i]) continue;
    const int p = pred.labels[i];
    const int g = gt.labels[i];
    if (p != kEmptyClass) ++pred_count[p];
    if (g != kEmptyClass) ++gt_count[g];
    if (p == g && p != kEmptyClass) ++inter[p];
    max_class = std::max({max_class, p, g});
  }

  MeanIouResult result;
  double sum = 0.0;
  int n = 0;
  for (int c = 1; c <= max_class; ++c) {
    const auto pc = pred_count.find(c);
    const auto gc = gt_count.find(c);
    const bool present = pc != pred_count.end() || gc != gt_count.end();
    if (!present && !include_absent_classes) continue;
    const double p = pc != pred_count.end() ? static_cast<double>(pc->second) : 0.0;
    const double g = gc != gt_count.end() ? static_cast<double>(gc->second) : 0.0;
    const double in = inter.count(c) ? static_cast<double>(inter.at(c)) : 0.0;
    const double iou = iou_or(in, p + g - in, 0.0);
    result.per_class[c] = iou;
    sum += iou;
    ++n;
  }
  result.miou = n > 0 ? sum / n : 1.0;  // vacuously perfect when nothing present
  return result;
}

namespace {

struct SegmentKey {
  int class_id;
  int instance_id;  // -1 marks the single stuff segment of a class
  friend auto operator<=>(const SegmentKey&, const SegmentKey&) = default;
};

std::map<SegmentKey, std::size_t> collect_segments(const PanopticGrid& grid,
                                                   const ClassTable& classes) {
  std::map<SegmentKey, std::size_t> sizes;
  for (std::size_t i = 0; i < grid.labels.size(); ++i) {
    const int label = grid.labels[i];
    if (label == kEmptyClass) continue;
    if (classes.is_thing(label)) {
      const int id = grid.instance_ids[i];
      if (id < 0) continue;  // unlabeled thing voxel forms no segment
      ++sizes[{label, id}];
    } else {
      ++sizes[{label, -1}];
    }
  }
  return sizes;
}

struct Totals {
  double pq_sum = 0.0, rq_sum = 0.0;
  int classes = 0;
};

void finalize(const Totals& t, double& pq, double& rq, double& sq) {
  pq = t.classes > 0 ? t.pq_sum / t.classes : 0.0;
  rq = t.classes > 0 ? t.rq_sum / t.classes : 0.0;
  sq = rq > 0.0 ? pq / rq : 0.0;
}

}  // namespace

PQReport panoptic_quality(const PanopticGrid& pred, const PanopticGrid& gt,
                          const ClassTable& classes) {
  require_same_spec(pred.spec, gt.spec, "panoptic_quality");

  const std::map<SegmentKey, std::size_t> pred_sizes = collect_segments(pred, classes);
  const std::map<SegmentKey, std::size_t> gt_sizes = collect_segments(gt, classes);

  // voxel-level co-occurrence of pred and gt segments of the same class
  std::map<std::pair<SegmentKey, SegmentKey>, std::size_t> overlap;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const int pl = pred.labels[i];
    const int gl = gt.labels[i];
    if (pl == kEmptyClass || pl != gl) continue;
    SegmentKey pk{pl, -1}, gk{gl, -1};
    if (classes.is_thing(pl)) {
      pk.instance_id = pred.instance_ids[i];
      gk.instance_id = gt.instance_ids[i];
      if (pk.instance_id < 0 || gk.instance_id < 0) continue;
    }
    ++overlap[{pk, gk}];
  }

  PQReport report;
  std::set<int> class_ids;
  for (const auto& [key, size] : pred_sizes) class_ids.insert(key.class_id);
  for (const auto& [key, size] : gt_sizes) class_ids.insert(key.class_id);

  std::map<SegmentKey, bool> pred_matched, gt_matched;
  for (const auto& [pair, inter] : overlap) {
    const auto& [pk, gk] = pair;
    const double uni = static_cast<double>(pred_sizes.at(pk) + gt_sizes.at(gk) - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (iou > 0.5) {  // strict: IoU exactly 0.5 is no match
      PQClassStats& s = report.per_class[pk.class_id];
      ++s.tp;
      s.iou_sum += iou;
      pred_matched[pk] = true;
      gt_matched[gk] = true;
    }
  }
  for (const auto& [key, size] : pred_sizes)
    if (!pred_matched.count(key)) ++report.per_class[key.class_id].fp;
  for (const auto& [key, size] : gt_sizes)
    if (!gt_matched.count(key)) ++report.per_class[key.class_id].fn;

  Totals all, things, stuff;
  for (int c : class_ids) {
    PQClassStats& s = report.per_class[c];
    const double denom = s.tp + 0.5 * s.fp + 0.5 * s.fn;
    if (denom <= 0.0) continue;
    s.pq = s.iou_sum / denom;
    s.rq = s.tp / denom;
    s.sq = s.tp > 0 ? s.iou_sum / s.tp : 0.0;
    Totals& split = classes.is_thing(c) ? things : stuff;
    for (Totals* t : {&all, &split}) {
      t->pq_sum += s.pq;
      t->rq_sum += s.rq;
      ++t->classes;
    }
  }
  finalize(all, report.pq, report.rq, report.sq);
  finalize(things, report.pq_things, report.rq_things, report.sq_things);
  finalize(stuff, report.pq_stuff, report.rq_stuff, report.sq_stuff);
  return report;
}

EvalReport evaluate_grids(const SemanticGrid& pred_sem, const SemanticGrid& gt_sem,
                          const PanopticGrid& pred_pan, const PanopticGrid& gt_pan,
                          const ClassTable& classes, const VisibilityMask* mask) {
  EvalReport report;
  report.masked = mask != nullptr;
  report.iou = binary_iou(pred_sem, gt_sem, mask);
  const MeanIouResult miou = mean_iou(pred_sem, gt_sem, mask);
  report.miou = miou.miou;
  report.per_class_iou = miou.per_class;
  const PQReport pq = panoptic_quality(pred_pan, gt_pan, classes);
  report.pq = pq.pq;
  report.rq = pq.rq;
  report.sq = pq.sq;
  report.pq_things = pq.pq_things;
  report.rq_things = pq.rq_things;
  report.sq_things = pq.sq_things;
  report.pq_stuff = pq.pq_stuff;
  report.rq_stuff = pq.rq_stuff;
  report.sq_stuff = pq.sq_stuff;
  return report;
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, iou] : r.per_class_iou) per_class[std::to_string(c)] = iou;
  return {{"iou", r.iou},
          {"miou", r.miou},
          {"per_class_iou", per_class},
          {"pq", r.pq},
          {"rq", r.rq},
          {"sq", r.sq},
          {"pq_things", r.pq_things},
          {"rq_things", r.rq_things},
          {"sq_things", r.sq_things},
          {"pq_stuff", r.pq_stuff},
          {"rq_stuff", r.rq_stuff},
          {"sq_stuff", r.sq_stuff},
          {"masked", r.masked}};
}

std::string eval_report_csv_header() {
  return "masked,iou,miou,pq,rq,sq,pq_things,rq_things,sq_things,pq_stuff,"
         "rq_stuff,sq_stuff";
}

std::string eval_report_csv_row(const EvalReport& r) {
  char line[512];
  std::snprintf(line, sizeof line,
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                r.masked ? 1 : 0, r.iou, r.miou, r.pq, r.rq, r.sq, r.pq_things,
                r.rq_things, r.sq_things, r.pq_stuff, r.rq_stuff, r.sq_stuff);
  return line;
}

}  // namespace occ
