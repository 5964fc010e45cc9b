#include "occ/panoptic.hpp"

#include <map>
#include <stdexcept>
#include <vector>

namespace occ {

namespace {

struct BallOffset {
  int dx, dy, dz;
  int dist;
};

// Offsets of the Manhattan ball |dx|+|dy|+|dz| <= r, sorted by distance so
// the nearest-carrier tiebreak falls out of the scan order.
std::vector<BallOffset> manhattan_ball(int r) {
  std::vector<BallOffset> ball;
  for (int d = 0; d <= r; ++d)
    for (int dz = -d; dz <= d; ++dz)
      for (int dy = -(d - std::abs(dz)); dy <= d - std::abs(dz); ++dy) {
        const int rem = d - std::abs(dz) - std::abs(dy);
        ball.push_back({rem, dy, dz, d});
        if (rem != 0) ball.push_back({-rem, dy, dz, d});
      }
  return ball;
}

}  // namespace

PanopticGrid merge_panoptic(const SemanticGrid& baseline,
                            const InstanceMap& instances,
                            const ClassTable& classes,
                            const PanopticConfig& cfg) {
  if (!(baseline.spec == instances.spec))
    throw std::invalid_argument("merge_panoptic: grid spec mismatch");
  if (cfg.radius < 0)
    throw std::invalid_argument("merge_panoptic: negative radius");

  const GridSpec& spec = baseline.spec;
  PanopticGrid out = make_panoptic_grid(spec);
  out.labels = baseline.labels;
  const std::vector<BallOffset> ball = manhattan_ball(cfg.radius);

  struct Vote {
    int count = 0;
    int nearest = 0;
  };
  std::map<int, Vote> votes;

  for (int z = 0; z < spec.dims[2]; ++z)
    for (int y = 0; y < spec.dims[1]; ++y)
      for (int x = 0; x < spec.dims[0]; ++x) {
        const VoxelIndex v{x, y, z};
        const int label = baseline.labels.at(v);
        if (!classes.is_thing(label)) continue;  // stuff and empty pass through

        votes.clear();
        for (const BallOffset& o : ball) {
          const VoxelIndex n{x + o.dx, y + o.dy, z + o.dz};
          if (!spec.contains(n)) continue;
          const int id = instances.ids.at(n);
          if (id < 0) continue;
          auto [it, inserted] = votes.emplace(id, Vote{1, o.dist});
          if (!inserted) ++it->second.count;
          // ball is distance-sorted, so the first sighting is the nearest
        }
        if (votes.empty()) {
          out.labels.at(v) = kEmptyClass;  // unsupported thing voxel
          continue;
        }
        int best_id = -1;
        Vote best{};
        for (const auto& [id, vote] : votes) {
          const bool better =
              vote.count > best.count ||
              (vote.count == best.count && vote.nearest < best.nearest);
          // map iteration is id-ascending: strict comparisons keep the
          // smaller id on full ties
          if (best_id < 0 || better) {
            best_id = id;
            best = vote;
          }
        }
        out.instance_ids.at(v) = best_id;
      }
  return out;
}

}  // namespace occ
