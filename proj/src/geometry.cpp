#include "haptigrasp/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace hg {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  if (std::abs(v) <= kGeomTol * kGeomTol) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) - kGeomTol <= p.x() && p.x() <= std::max(a.x(), b.x()) + kGeomTol &&
         std::min(a.y(), b.y()) - kGeomTol <= p.y() && p.y() <= std::max(a.y(), b.y()) + kGeomTol;
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  return r - kPi;
}

double axis_offset(double theta, double axis) {
  double d = std::fmod(theta - axis + kPi / 2.0, kPi);
  if (d < 0) d += kPi;
  return d - kPi / 2.0;
}

double signed_area(std::span<const Vec2> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * s;
}

Vec2 area_centroid(std::span<const Vec2> poly) {
  const double a = signed_area(poly);
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    c += (p + q) * cross(p, q);
  }
  return c / (6.0 * a);
}

double diameter(std::span<const Vec2> poly) {
  double d = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, (poly[i] - poly[j]).norm());
  return d;
}

bool is_simple(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[i] - poly[(i + 1) % n]).norm() <= kGeomTol) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

double distance_to_segment(const Vec2& p, const Segment& s) {
  const Vec2 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

bool contains(std::span<const Vec2> poly, const Vec2& p) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (distance_to_segment(p, {poly[j], poly[i]}) <= kGeomTol) return true;
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a, const Vec2& b) {
  const Vec2 e = b - a;
  const double denom = cross(dir, e);
  const Vec2 w = a - origin;
  if (std::abs(denom) <= 1e-15) {
    // Parallel. Collinear overlap hits at the nearest endpoint ahead.
    if (std::abs(cross(w, dir)) > kGeomTol * dir.norm()) return std::nullopt;
    const double d2 = dir.squaredNorm();
    double ta = w.dot(dir) / d2;
    double tb = (b - origin).dot(dir) / d2;
    if (ta > tb) std::swap(ta, tb);
    if (tb < 0.0) return std::nullopt;
    return std::max(ta, 0.0);
  }
  const double t = cross(w, e) / denom;
  const double u = cross(w, dir) / denom;
  const double eps = kGeomTol / std::max(e.norm(), kGeomTol);
  if (t < 0.0 || u < -eps || u > 1.0 + eps) return std::nullopt;
  return t;
}

std::vector<double> line_crossings(std::span<const Vec2> poly, const Vec2& origin, const Vec2& dir) {
  std::vector<double> ts;
  const std::size_t n = poly.size();
  const double dn = dir.norm();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double sa = cross(dir, a - origin) / dn;
    const double sb = cross(dir, b - origin) / dn;
    // Half-open rule on vertices so a crossing through a vertex counts once.
    if ((sa > 0) == (sb > 0)) continue;
    const double f = sa / (sa - sb);
    const Vec2 p = a + f * (b - a);
    ts.push_back((p - origin).dot(dir) / (dn * dn));
  }
  std::sort(ts.begin(), ts.end());
  return ts;
}

Polygon transform(std::span<const Vec2> poly, double x, double y, double theta) {
  const Eigen::Rotation2Dd rot(theta);
  Polygon out;
  out.reserve(poly.size());
  for (const Vec2& p : poly) out.push_back(rot * p + Vec2(x, y));
  return out;
}

}  // namespace hg
