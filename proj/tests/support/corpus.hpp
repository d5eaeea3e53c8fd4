#pragma once

#include <vector>

#include "haptigrasp/catalog.hpp"
#include "haptigrasp/haptics.hpp"

namespace hg::testing {

struct LabelledEpisode {
  HapticEpisode episode;
  GraspOutcome outcome;
  Material material;
};

/// Episodes over catalog objects with grasps scattered around the centroid,
/// so successes, slips, misses and pushes all occur.
inline std::vector<LabelledEpisode> make_corpus(int n, std::uint64_t seed, double spread = 0.02) {
  const Catalog cat = generate_catalog(seed, 14, 0);
  const SimParams sim;
  const HapticParams hp;
  Rng rng(seed);
  std::vector<LabelledEpisode> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const CatalogEntry& e = cat.entries[i % cat.entries.size()];
    const Scene s = create_scene(rng(), e);
    const auto& axis = s.object.graspable_axes[uniform_int(rng, 0, static_cast<int>(s.object.graspable_axes.size()) - 1)];
    GraspPose g{s.object.pose.x + uniform(rng, -spread, spread), s.object.pose.y + uniform(rng, -spread, spread),
                uniform(rng, 0.0, s.object.height), s.object.pose.theta + axis.angle + gaussian(rng, 0.0, 0.3),
                static_cast<GripperMode>(uniform_int(rng, 0, kNumModes - 1))};
    g = clamp_grasp(g, s.workspace);
    const GraspOutcome o = execute_grasp(s.workspace, s.object, g, sim, rng);
    out.push_back({generate_episode(s.object, g, o, s.workspace, sim, hp, rng), o, e.material});
  }
  return out;
}

}  // namespace hg::testing
