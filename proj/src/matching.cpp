#include "occ/matching.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace occ {

Assignment hungarian_solve(const CostMatrix& costs) {
  const int n = costs.rows;
  const int m = costs.cols;
  if (n == 0) return {};
  if (n > m)
    throw std::invalid_argument("hungarian_solve: more rows than columns");
  for (double v : costs.values)
    if (!std::isfinite(v))
      throw std::invalid_argument("hungarian_solve: non-finite cost");

  // Shortest augmenting paths with potentials (1-based, column 0 virtual).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);  // row assigned to column
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  std::vector<double> minv(static_cast<std::size_t>(m) + 1);
  std::vector<char> used(static_cast<std::size_t>(m) + 1);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur =
            costs.at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment result;
  result.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    const int row = p[static_cast<std::size_t>(j)];
    if (row > 0) result.row_to_col[static_cast<std::size_t>(row) - 1] = j - 1;
  }
  for (int i = 0; i < n; ++i)
    result.total_cost += costs.at(i, result.row_to_col[static_cast<std::size_t>(i)]);
  return result;
}

double object_match_cost(const ObjectPrediction& pred, const GroundTruthObject& gt,
                         const LossWeights& w) {
  const std::vector<double> probs = class_probabilities(pred);
  if (gt.class_id < 0 || gt.class_id >= static_cast<int>(probs.size()))
    throw std::invalid_argument("object_match_cost: gt class outside logit range");
  const double p = probs[static_cast<std::size_t>(gt.class_id)];
  return w.lambda1 * -p + w.lambda2 * norm(pred.center - gt.center);
}

std::vector<int> match_objects(std::span<const ObjectPrediction> preds,
                               std::span<const GroundTruthObject> gts,
                               const LossWeights& w) {
  if (preds.size() < gts.size())
    throw std::invalid_argument("match_objects: fewer predictions than targets");
  const int q = static_cast<int>(preds.size());
  const int g = static_cast<int>(gts.size());
  std::vector<int> sigma(static_cast<std::size_t>(q), -1);
  if (g == 0) return sigma;

  // Square matrix: columns beyond the real targets are background padding
  // with cost 0, so every real target is covered by some prediction.
  CostMatrix costs(q, q, 0.0);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < g; ++j)
      costs.at(i, j) =
          object_match_cost(preds[static_cast<std::size_t>(i)], gts[static_cast<std::size_t>(j)], w);

  const Assignment a = hungarian_solve(costs);
  for (int i = 0; i < q; ++i) {
    const int col = a.row_to_col[static_cast<std::size_t>(i)];
    if (col < g) sigma[static_cast<std::size_t>(i)] = col;
  }
  return sigma;
}

double voxel_match_cost(const Vec3& candidate, double score,
                        const std::optional<Vec3>& target) {
  if (!target) return 0.0;
  return -score + norm(candidate - *target);
}

std::vector<int> match_voxels(const ObjectPrediction& pred,
                              const GroundTruthObject& gt, const Vec3& anchor) {
  const int k = static_cast<int>(pred.offsets.size());
  const int t = static_cast<int>(gt.voxel_centers.size());
  if (k < t)
    throw std::invalid_argument("match_voxels: fewer offsets than target voxels");

  CostMatrix costs(k, k, 0.0);
  for (int i = 0; i < k; ++i) {
    const Vec3 candidate = anchor + pred.offsets[static_cast<std::size_t>(i)];
    for (int j = 0; j < t; ++j)
      costs.at(i, j) = voxel_match_cost(candidate, pred.scores[static_cast<std::size_t>(i)],
                                        gt.voxel_centers[static_cast<std::size_t>(j)]);
  }

  const Assignment a = hungarian_solve(costs);
  std::vector<int> sigma(static_cast<std::size_t>(k), -1);
  for (int i = 0; i < k; ++i) {
    const int col = a.row_to_col[static_cast<std::size_t>(i)];
    if (col < t) sigma[static_cast<std::size_t>(i)] = col;
  }
  return sigma;
}

MatchResult match_all(std::span<const ObjectPrediction> preds,
                      std::span<const GroundTruthObject> gts,
                      const LossWeights& w, AnchorMode mode) {
  MatchResult result;
  result.sigma_det = match_objects(preds, gts, w);
  result.sigma_occ.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int j = result.sigma_det[i];
    if (j < 0) continue;
    const GroundTruthObject& gt = gts[static_cast<std::size_t>(j)];
    const Vec3 anchor = mode == AnchorMode::decoupled ? gt.center : preds[i].center;
    result.sigma_occ[i] = match_voxels(preds[i], gt, anchor);
    result.total_cost += object_match_cost(preds[i], gt, w);
  }
  return result;
}

}  // namespace occ
