#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "occ/matching.hpp"

using namespace occ;

namespace {

// exhaustive minimum over all row->column injections
double brute_force_min(const CostMatrix& c, std::vector<int>* best_out = nullptr) {
  std::vector<int> cols(static_cast<std::size_t>(c.cols));
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
  do {
    double total = 0.0;
    for (int r = 0; r < c.rows; ++r) total += c.at(r, cols[static_cast<std::size_t>(r)]);
    if (total < best) {
      best = total;
      best_assign.assign(cols.begin(), cols.begin() + c.rows);
    }
  } while (std::next_permutation(cols.begin(), cols.end()));
  if (best_out) *best_out = best_assign;
  return best;
}

CostMatrix random_costs(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  CostMatrix c(rows, cols);
  for (double& v : c.values) v = u(rng);
  return c;
}

GridSpec unit_spec(int n) {
  GridSpec spec;
  spec.origin = {0.0, 0.0, 0.0};
  spec.voxel_size = {1.0, 1.0, 1.0};
  spec.dims = {n, n, n};
  return spec;
}

ObjectPrediction simple_pred(const Vec3& center, int cls, int classes, int k) {
  ObjectPrediction p;
  p.class_logits.assign(static_cast<std::size_t>(classes), 0.0);
  p.class_logits[static_cast<std::size_t>(cls)] = 10.0;
  p.center = center;
  p.offsets.assign(static_cast<std::size_t>(k), Vec3{});
  p.scores.assign(static_cast<std::size_t>(k), 0.5);
  return p;
}

}  // namespace

TEST_CASE("assignment matches the exhaustive minimum") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 6);
    const int cols = rows + static_cast<int>(rng() % 2);
    const CostMatrix c = random_costs(rows, cols, rng);
    const Assignment a = hungarian_solve(c);
    const double expect = brute_force_min(c);
    CHECK(a.total_cost == doctest::Approx(expect).epsilon(1e-10));
    // assignment is injective and consistent with its reported cost
    double replay = 0.0;
    std::vector<bool> used(static_cast<std::size_t>(c.cols), false);
    REQUIRE(a.row_to_col.size() == static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      const int col = a.row_to_col[static_cast<std::size_t>(r)];
      REQUIRE(col >= 0);
      REQUIRE(col < cols);
      CHECK(!used[static_cast<std::size_t>(col)]);
      used[static_cast<std::size_t>(col)] = true;
      replay += c.at(r, col);
    }
    CHECK(replay == doctest::Approx(a.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("assignment rejects malformed inputs") {
  CHECK_THROWS_AS(hungarian_solve(CostMatrix(3, 2)), std::invalid_argument);
  CostMatrix bad(2, 2);
  bad.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(hungarian_solve(bad), std::invalid_argument);
  bad.at(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian_solve(bad), std::invalid_argument);
  const Assignment empty = hungarian_solve(CostMatrix(0, 0));
  CHECK(empty.row_to_col.empty());
  CHECK(empty.total_cost == 0.0);
}

TEST_CASE("ties resolve toward the lowest column") {
  CostMatrix c(1, 3, 1.0);  // all equal
  CHECK(hungarian_solve(c).row_to_col[0] == 0);
  CostMatrix two(2, 2, 1.0);
  const Assignment a = hungarian_solve(two);
  CHECK(a.row_to_col[0] == 0);
  CHECK(a.row_to_col[1] == 1);
}

TEST_CASE("object match cost combines class probability and distance") {
  const ClassTable classes;
  const GridSpec spec = unit_spec(8);
  const GroundTruthObject gt =
      make_ground_truth_object(spec, 3, {{0, 0, 0}, {1, 0, 0}}, 1);
  LossWeights w;
  const ObjectPrediction exact = simple_pred(gt.center, 3, classes.size(), 2);
  const double p_gt = class_probabilities(exact)[3];
  CHECK(object_match_cost(exact, gt, w) ==
        doctest::Approx(w.lambda1 * -p_gt).epsilon(1e-12));

  ObjectPrediction off = exact;
  off.center = gt.center + Vec3{3.0, 0.0, 0.0};
  CHECK(object_match_cost(off, gt, w) ==
        doctest::Approx(w.lambda1 * -p_gt + w.lambda2 * 3.0).epsilon(1e-9));
}

TEST_CASE("every ground truth object is matched; spares go to background") {
  const ClassTable classes;
  const GridSpec spec = unit_spec(8);
  std::vector<GroundTruthObject> gts;
  gts.push_back(make_ground_truth_object(spec, 3, {{0, 0, 0}}, 1));
  gts.push_back(make_ground_truth_object(spec, 4, {{5, 5, 5}}, 2));

  std::vector<ObjectPrediction> preds;
  preds.push_back(simple_pred(gts[1].center, 4, classes.size(), 1));
  preds.push_back(simple_pred({2.0, 2.0, 2.0}, 1, classes.size(), 1));
  preds.push_back(simple_pred(gts[0].center, 3, classes.size(), 1));

  const std::vector<int> sigma = match_objects(preds, gts, LossWeights{});
  REQUIRE(sigma.size() == 3);
  CHECK(sigma[0] == 1);
  CHECK(sigma[2] == 0);
  CHECK(sigma[1] == -1);  // background padding

  // all ground truths covered exactly once
  std::vector<int> hit(gts.size(), 0);
  for (int s : sigma)
    if (s >= 0) ++hit[static_cast<std::size_t>(s)];
  for (int h : hit) CHECK(h == 1);

  CHECK_THROWS_AS(match_objects(std::span<const ObjectPrediction>(preds.data(), 1),
                                gts, LossWeights{}),
                  std::invalid_argument);
}

TEST_CASE("voxel match cost formula") {
  const Vec3 cand{1.0, 2.0, 2.0};
  CHECK(voxel_match_cost(cand, 0.8, Vec3{1.0, 2.0, 4.0}) ==
        doctest::Approx(-0.8 + 2.0).epsilon(1e-9));
  CHECK(voxel_match_cost(cand, 0.8, std::nullopt) == 0.0);
}

TEST_CASE("voxel matching equals padded brute force") {
  const GridSpec spec = unit_spec(6);
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 5.9);
  std::uniform_real_distribution<double> s(0.0, 1.0);

  for (int trial = 0; trial < 60; ++trial) {
    const int n_targets = 1 + static_cast<int>(rng() % 3);
    const int k = n_targets + static_cast<int>(rng() % 3);
    std::vector<VoxelIndex> voxels;
    while (static_cast<int>(voxels.size()) < n_targets) {
      const VoxelIndex v{static_cast<int>(rng() % 6), static_cast<int>(rng() % 6),
                         static_cast<int>(rng() % 6)};
      if (std::find(voxels.begin(), voxels.end(), v) == voxels.end())
        voxels.push_back(v);
    }
    const GroundTruthObject gt = make_ground_truth_object(spec, 3, voxels, 1);

    ObjectPrediction pred;
    pred.class_logits = {0.0, 0.0, 0.0, 5.0};
    pred.center = {u(rng), u(rng), u(rng)};
    for (int i = 0; i < k; ++i) {
      pred.offsets.push_back({u(rng) - 3.0, u(rng) - 3.0, u(rng) - 3.0});
      pred.scores.push_back(s(rng));
    }
    const Vec3 anchor{u(rng), u(rng), u(rng)};

    // brute force over the K x K padded problem
    CostMatrix c(k, k);
    for (int r = 0; r < k; ++r)
      for (int col = 0; col < k; ++col) {
        const std::size_t ri = static_cast<std::size_t>(r);
        c.at(r, col) = voxel_match_cost(
            anchor + pred.offsets[ri], pred.scores[ri],
            col < n_targets ? std::optional<Vec3>(gt.voxel_centers[static_cast<std::size_t>(col)])
                            : std::nullopt);
      }
    const double expect = brute_force_min(c);

    const std::vector<int> sigma = match_voxels(pred, gt, anchor);
    REQUIRE(sigma.size() == static_cast<std::size_t>(k));
    double got = 0.0;
    std::vector<int> target_hits(static_cast<std::size_t>(n_targets), 0);
    for (int r = 0; r < k; ++r) {
      const int t = sigma[static_cast<std::size_t>(r)];
      if (t >= 0) {
        ++target_hits[static_cast<std::size_t>(t)];
        got += voxel_match_cost(anchor + pred.offsets[static_cast<std::size_t>(r)],
                                pred.scores[static_cast<std::size_t>(r)],
                                gt.voxel_centers[static_cast<std::size_t>(t)]);
      }
    }
    for (int h : target_hits) CHECK(h == 1);  // every target claimed once
    CHECK(got == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("match_voxels requires enough candidates") {
  const GridSpec spec = unit_spec(4);
  const GroundTruthObject gt =
      make_ground_truth_object(spec, 3, {{0, 0, 0}, {1, 0, 0}}, 1);
  ObjectPrediction pred;
  pred.class_logits = {0.0, 0.0, 0.0, 5.0};
  pred.offsets = {{0.0, 0.0, 0.0}};
  pred.scores = {1.0};
  CHECK_THROWS_AS(match_voxels(pred, gt, gt.center), std::invalid_argument);
}

TEST_CASE("match_all anchors voxel matching by mode") {
  const ClassTable classes;
  const GridSpec spec = unit_spec(8);
  const GroundTruthObject gt =
      make_ground_truth_object(spec, 3, {{1, 1, 1}, {2, 1, 1}}, 1);
  std::vector<GroundTruthObject> gts{gt};

  // offsets exactly reproduce the voxel centers from the gt center
  ObjectPrediction pred = simple_pred(gt.center + Vec3{2.0, 0.0, 0.0}, 3,
                                      classes.size(), 2);
  pred.offsets[0] = gt.voxel_centers[0] - gt.center;
  pred.offsets[1] = gt.voxel_centers[1] - gt.center;
  pred.scores = {1.0, 1.0};
  std::vector<ObjectPrediction> preds{pred};

  const MatchResult dec = match_all(preds, gts, LossWeights{}, AnchorMode::decoupled);
  REQUIRE(dec.sigma_det.size() == 1);
  CHECK(dec.sigma_det[0] == 0);
  REQUIRE(dec.sigma_occ[0].size() == 2);
  // decoupled anchor = gt center: offset k hits target k exactly
  CHECK(dec.sigma_occ[0][0] == 0);
  CHECK(dec.sigma_occ[0][1] == 1);

  const MatchResult cpl = match_all(preds, gts, LossWeights{}, AnchorMode::coupled);
  // coupled anchor = shifted pred center: offset 1 lands on voxel 0's
  // neighbor; the assignment still covers both targets
  std::vector<int> hits(2, 0);
  for (int t : cpl.sigma_occ[0])
    if (t >= 0) ++hits[static_cast<std::size_t>(t)];
  CHECK(hits[0] == 1);
  CHECK(hits[1] == 1);
}
