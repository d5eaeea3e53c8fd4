#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

namespace hg {

using Vec2 = Eigen::Vector2d;
using Polygon = std::vector<Vec2>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kGeomTol = 1e-9;

struct Segment {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  double length() const { return (b - a).norm(); }
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

/// Signed difference between an orientation and an undirected axis, both in
/// radians, reduced modulo pi into [-pi/2, pi/2).
double axis_offset(double theta, double axis);

double signed_area(std::span<const Vec2> poly);
Vec2 area_centroid(std::span<const Vec2> poly);
double diameter(std::span<const Vec2> poly);

/// True when no two non-adjacent edges intersect.
bool is_simple(std::span<const Vec2> poly);

/// Even-odd test; points on the boundary (within kGeomTol) count as inside.
bool contains(std::span<const Vec2> poly, const Vec2& p);

double distance_to_segment(const Vec2& p, const Segment& s);

/// Ray parameter t >= 0 at which origin + t * dir meets segment [a, b], or
/// nullopt. `dir` need not be unit length; t is in units of |dir|.
std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a, const Vec2& b);

/// All parameters at which the infinite line origin + t * dir crosses the
/// polygon boundary, sorted ascending, duplicates at shared vertices removed.
std::vector<double> line_crossings(std::span<const Vec2> poly, const Vec2& origin, const Vec2& dir);

Polygon transform(std::span<const Vec2> poly, double x, double y, double theta);

}  // namespace hg
