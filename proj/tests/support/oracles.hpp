#pragma once

#include <cmath>
#include <optional>

#include "haptigrasp/world.hpp"

namespace hg::testing {

/// Winding-number point-in-polygon, written independently of the library's
/// even-odd test so the two can cross-check each other.
inline bool inside_by_winding(const Polygon& poly, const Vec2& p) {
  int winding = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross > 0) ++winding;
    } else if (b.y() <= p.y() && cross < 0) {
      --winding;
    }
  }
  return winding != 0;
}

/// Distance along the ray to the first sample inside the object, marching in
/// fixed steps; nullopt when no sample within `max_len` is inside.
inline std::optional<double> ray_march_hit(const Polygon& world_poly, const Vec2& start, const Vec2& dir,
                                           double max_len, double step = 1e-4) {
  const Vec2 d = dir.normalized();
  const auto n = static_cast<long>(std::floor(max_len / step));
  for (long k = 0; k <= n; ++k) {
    const double t = k * step;
    if (inside_by_winding(world_poly, start + t * d)) return t;
  }
  return std::nullopt;
}

/// Inclusive ray exit parameter for a box workspace.
inline double exit_distance(const Workspace& ws, const Vec2& p, const Vec2& dir) {
  const Vec2 d = dir.normalized();
  double t = std::numeric_limits<double>::infinity();
  if (d.x() > 0) t = std::min(t, (ws.x_extent.max - p.x()) / d.x());
  if (d.x() < 0) t = std::min(t, (ws.x_extent.min - p.x()) / d.x());
  if (d.y() > 0) t = std::min(t, (ws.y_extent.max - p.y()) / d.y());
  if (d.y() < 0) t = std::min(t, (ws.y_extent.min - p.y()) / d.y());
  return t;
}

struct ScanCase {
  Scene scene;
  Vec2 start;
  Vec2 direction;
};

/// Random scene plus a scan start outside the object; the direction aims at
/// a point of the object's inner disc so the true chord is never a graze.
inline ScanCase random_aimed_scan(std::uint64_t seed) {
  Rng rng(seed);
  RandomPolygonSpec spec;
  spec.n_vertices = uniform_int(rng, 4, 10);
  spec.min_radius = uniform(rng, 0.02, 0.03);
  spec.max_radius = spec.min_radius + uniform(rng, 0.0, 0.013);
  spec.material = kAllMaterials[uniform_int(rng, 0, kNumMaterials - 1)];
  ScanCase c{create_scene(rng(), spec), Vec2::Zero(), Vec2::UnitX()};
  const Polygon poly = c.scene.object.world_polygon();
  do {
    c.start = {uniform(rng, c.scene.workspace.x_extent.min, c.scene.workspace.x_extent.max),
               uniform(rng, c.scene.workspace.y_extent.min, c.scene.workspace.y_extent.max)};
  } while (inside_by_winding(poly, c.start));
  const double a = uniform(rng, -kPi, kPi);
  const double r = uniform(rng, 0.0, 0.2 * spec.min_radius);
  const Vec2 target = c.scene.object.centroid() + r * Vec2(std::cos(a), std::sin(a));
  c.direction = (target - c.start).normalized();
  return c;
}

}  // namespace hg::testing
