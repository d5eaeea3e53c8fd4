#include "haptigrasp/world.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>

#include "haptigrasp/error.hpp"

namespace hg {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view kind) {
  for (const auto& [value, name] : table)
    if (name == s) return value;
  throw ValidationError("unknown " + std::string(kind) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<Material, std::string_view>, kNumMaterials> kMaterialNames{{
    {Material::metal, "metal"},
    {Material::hard_plastic, "hard_plastic"},
    {Material::elastic_plastic, "elastic_plastic"},
    {Material::stuffed_fabric, "stuffed_fabric"},
    {Material::wood, "wood"},
    {Material::glass, "glass"},
    {Material::ceramic, "ceramic"},
}};

constexpr std::array<std::pair<GripperMode, std::string_view>, kNumModes> kModeNames{{
    {GripperMode::pinch, "pinch"},
    {GripperMode::normal, "normal"},
    {GripperMode::wide, "wide"},
}};

constexpr std::array<std::pair<Split, std::string_view>, 2> kSplitNames{{
    {Split::train, "train"},
    {Split::test, "test"},
}};

Polygon random_star_polygon(const RandomPolygonSpec& spec, Rng& rng) {
  if (spec.n_vertices < 3) throw ValidationError("polygon has fewer than 3 vertices");
  if (!(spec.min_radius > 0.0) || spec.max_radius < spec.min_radius)
    throw ValidationError("random polygon radii must satisfy 0 < min_radius <= max_radius");
  Polygon poly;
  const double step = 2.0 * kPi / spec.n_vertices;
  for (int i = 0; i < spec.n_vertices; ++i) {
    const double a = i * step + uniform(rng, -0.3, 0.3) * step;
    const double r = uniform(rng, spec.min_radius, spec.max_radius);
    poly.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return poly;
}

void validate_polygon(std::span<const Vec2> poly, const SimParams& params) {
  if (poly.size() < 3) throw ValidationError("polygon has fewer than 3 vertices");
  if (!is_simple(poly)) throw ValidationError("polygon is not simple");
  if (signed_area(poly) <= 0.0) throw ValidationError("polygon is not counterclockwise");
  if (diameter(poly) > params.aperture * params.diameter_factor)
    throw ValidationError("polygon diameter exceeds aperture * diameter_factor");
}

double exit_parameter(const Workspace& ws, const Vec2& p, const Vec2& d) {
  double t = std::numeric_limits<double>::infinity();
  const auto axis = [&](double pos, double dir, const Interval& iv) {
    if (dir > 0) t = std::min(t, (iv.max - pos) / dir);
    else if (dir < 0) t = std::min(t, (iv.min - pos) / dir);
  };
  axis(p.x(), d.x(), ws.x_extent);
  axis(p.y(), d.y(), ws.y_extent);
  return std::max(t, 0.0);
}

double squeeze_fraction(const MaterialClass& m) {
  constexpr double k_ref = 1000.0;
  return 0.06 * k_ref / (m.stiffness + k_ref);
}

}  // namespace

Vec2 Workspace::clamp(const Vec2& p) const {
  return {std::clamp(p.x(), x_extent.min, x_extent.max), std::clamp(p.y(), y_extent.min, y_extent.max)};
}

void Workspace::validate() const {
  if (!(x_extent.min < x_extent.max) || !(y_extent.min < y_extent.max))
    throw ValidationError("workspace extents are degenerate");
}

std::string_view to_string(Material m) {
  for (const auto& [value, name] : kMaterialNames)
    if (value == m) return name;
  return "?";
}
Material material_from_string(std::string_view s) { return parse_enum(s, kMaterialNames, "material"); }

std::string_view to_string(GripperMode m) {
  for (const auto& [value, name] : kModeNames)
    if (value == m) return name;
  return "?";
}
GripperMode mode_from_string(std::string_view s) { return parse_enum(s, kModeNames, "gripper mode"); }

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }
Split split_from_string(std::string_view s) { return parse_enum(s, kSplitNames, "split"); }

MaterialClass default_material(Material m) {
  switch (m) {
    case Material::metal: return {m, 5000.0, 0.40, 0.15};
    case Material::hard_plastic: return {m, 2000.0, 0.45, 0.12};
    case Material::elastic_plastic: return {m, 800.0, 0.70, 0.05};
    case Material::stuffed_fabric: return {m, 200.0, 0.85, 0.04};
    case Material::wood: return {m, 2800.0, 0.55, 0.08};
    case Material::glass: return {m, 4000.0, 0.30, 0.30};
    case Material::ceramic: return {m, 3500.0, 0.40, 0.20};
  }
  return {};
}

double instability_factor(const SimParams& params, double center_distance) {
  const double r = std::min(1.0, center_distance / params.center_tol);
  return params.instability_base + (1.0 - params.instability_base) * r;
}

std::vector<GraspableAxis> derive_axes(std::span<const Vec2> polygon, const MaterialClass& material) {
  const double tolerance = 0.12 + 0.2 * material.friction;
  const std::size_t n = polygon.size();
  std::vector<double> normals;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = polygon[(i + 1) % n] - polygon[i];
    normals.push_back(std::atan2(-e.x(), e.y()));
  }
  std::vector<GraspableAxis> axes;
  for (std::size_t i = 0; i < n; ++i) {
    bool antipodal = false;
    for (std::size_t j = 0; j < n && !antipodal; ++j)
      if (i != j && std::abs(wrap_angle(normals[i] - normals[j] - kPi)) < 0.3) antipodal = true;
    if (!antipodal) continue;
    const double axis = axis_offset(normals[i], 0.0);
    const bool dup = std::any_of(axes.begin(), axes.end(),
                                 [&](const GraspableAxis& a) { return std::abs(axis_offset(axis, a.angle)) < 0.05; });
    if (!dup) axes.push_back({axis, tolerance});
  }
  if (axes.empty()) {
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    const Vec2 c = area_centroid(polygon);
    for (const Vec2& p : polygon) cov += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Vec2 minor = es.eigenvectors().col(0);
    axes.push_back({axis_offset(std::atan2(minor.y(), minor.x()), 0.0), tolerance});
  }
  std::sort(axes.begin(), axes.end(), [](const auto& a, const auto& b) { return a.angle < b.angle; });
  return axes;
}

Scene create_scene(std::uint64_t seed, const ObjectSpec& spec, const Workspace& workspace, const SimParams& params) {
  workspace.validate();
  Rng rng(seed);
  ObjectInstance obj;
  Polygon poly;
  std::vector<GraspableAxis> axes;
  if (const auto* entry = std::get_if<CatalogEntry>(&spec)) {
    obj.id = entry->id;
    poly = entry->polygon;
    obj.height = entry->height;
    obj.material = default_material(entry->material);
    axes = entry->axes;
  } else {
    const auto& rs = std::get<RandomPolygonSpec>(spec);
    obj.id = rs.id;
    poly = random_star_polygon(rs, rng);
    obj.height = rs.height;
    obj.material = default_material(rs.material);
  }
  validate_polygon(poly, params);
  if (!(obj.height > 0.0)) throw ValidationError("object height must be positive");
  const Vec2 c = area_centroid(poly);
  for (Vec2& p : poly) p -= c;
  obj.polygon = std::move(poly);
  obj.graspable_axes = axes.empty() ? derive_axes(obj.polygon, obj.material) : axes;
  if (obj.graspable_axes.empty()) throw ValidationError("graspable_axes is empty");

  const double mx = std::min(params.placement_margin, 0.5 * workspace.x_extent.width());
  const double my = std::min(params.placement_margin, 0.5 * workspace.y_extent.width());
  obj.pose.theta = uniform(rng, -kPi, kPi);
  obj.pose.x = uniform(rng, workspace.x_extent.min + mx, workspace.x_extent.max - mx);
  obj.pose.y = uniform(rng, workspace.y_extent.min + my, workspace.y_extent.max - my);
  for (const Vec2& p : obj.world_polygon())
    if (!workspace.contains(p)) throw ValidationError("object vertex outside workspace extents");
  return {workspace, std::move(obj)};
}

ContactResult line_scan(const Workspace& workspace, const ObjectInstance& object, const Vec2& start,
                        const Vec2& direction, double max_len) {
  const double dn = direction.norm();
  if (!(dn > 0.0) || !std::isfinite(dn)) throw ArgumentError("line_scan direction has zero length");
  if (!workspace.contains(start)) throw ArgumentError("line_scan start outside workspace");
  const Vec2 d = direction / dn;
  const double t_end = std::min(std::max(max_len, 0.0), exit_parameter(workspace, start, d));
  const Polygon poly = object.world_polygon();

  ContactResult r;
  if (contains(poly, start)) {
    r.contact = true;
    r.contact_point = start;
    r.swept_segment = {start, start};
    return r;
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    // Strict comparison: a vertex hit is attributed to the earlier edge.
    const auto t = ray_segment_hit(start, d, poly[i], poly[(i + 1) % poly.size()]);
    if (t && *t <= t_end && *t < best) best = *t;
  }
  if (std::isfinite(best)) {
    r.contact = true;
    r.contact_point = start + best * d;
    r.swept_segment = {start, *r.contact_point};
  } else {
    r.swept_segment = {start, start + t_end * d};
  }
  return r;
}

ContactResult line_scan_empty(const Workspace& workspace, const Vec2& start, const Vec2& direction, double max_len) {
  const double dn = direction.norm();
  if (!(dn > 0.0) || !std::isfinite(dn)) throw ArgumentError("line_scan direction has zero length");
  if (!workspace.contains(start)) throw ArgumentError("line_scan start outside workspace");
  const Vec2 d = direction / dn;
  const double t_end = std::min(std::max(max_len, 0.0), exit_parameter(workspace, start, d));
  return {false, std::nullopt, {start, start + t_end * d}};
}

GraspGeometry grasp_geometry(const ObjectInstance& object, const GraspPose& grasp, const Workspace& workspace,
                             const SimParams& params) {
  GraspGeometry g;
  const Vec2 u(std::cos(grasp.theta), std::sin(grasp.theta));
  const Vec2 v(-u.y(), u.x());
  const Vec2 c(grasp.x, grasp.y);
  const Vec2 off = object.centroid() - c;
  g.axial_offset = off.dot(u);
  g.lateral_offset = off.dot(v);
  g.center_distance = off.norm();
  g.z_rel = grasp.z - workspace.grasp_plane_z;
  g.above_object = g.z_rel >= object.height;
  g.table_collision = g.z_rel < params.z_clearance;

  double best = std::numeric_limits<double>::infinity();
  for (const GraspableAxis& axis : object.graspable_axes) {
    const double e = axis_offset(grasp.theta, object.pose.theta + axis.angle);
    if (std::abs(e) < std::abs(best)) {
      best = e;
      g.axis_tolerance = axis.tolerance;
    }
  }
  g.axis_error = best;

  const double half = 0.5 * params.aperture;
  const double spread = params.finger_spread[static_cast<int>(grasp.mode)];
  const std::array<double, 3> lateral{spread, 0.0, -spread};
  const Polygon poly = object.world_polygon();
  for (int k = 0; k < 3; ++k) {
    FingerContact& f = g.fingers[k];
    if (g.above_object) continue;
    const auto ts = line_crossings(poly, c + lateral[k] * v, u);
    if (ts.size() < 2) continue;
    const double s_min = ts.front();
    const double s_max = ts.back();
    if (s_max <= -half || s_min >= half) continue;
    f.hits = true;
    f.chord = s_max - s_min;
    f.gap = k == 1 ? std::max(0.0, half - s_max) : std::max(0.0, s_min + half);
  }
  g.touched = g.fingers[0].hits || g.fingers[1].hits || g.fingers[2].hits;
  g.enclosed = g.fingers[1].hits && (g.fingers[0].hits || g.fingers[2].hits);
  if (g.enclosed) {
    double side_gap = std::numeric_limits<double>::infinity();
    for (int k : {0, 2})
      if (g.fingers[k].hits) side_gap = std::min(side_gap, g.fingers[k].gap);
    g.enclosure_travel = std::min(half, 0.5 * (g.fingers[1].gap + side_gap));
  }
  return g;
}

double enclosure_dof(const GraspGeometry& g, const MaterialClass& m, const SimParams& params) {
  if (!g.enclosed) return params.f_max;
  const double f = g.enclosure_travel / (0.5 * params.aperture) + squeeze_fraction(m);
  return std::min(0.98, f) * params.f_max;
}

GraspOutcome execute_grasp(const Workspace& workspace, const ObjectInstance& object, const GraspPose& grasp,
                           const SimParams& params, Rng& rng) {
  const GraspGeometry g = grasp_geometry(object, grasp, workspace, params);
  GraspOutcome out;
  out.enclosure_dof = enclosure_dof(g, object.material, params);

  // Fixed draw order regardless of branch keeps paired runs aligned.
  const double slip_draw = uniform(rng, 0.0, 1.0);
  const double push_draw = uniform(rng, 0.0, 1.0);
  const double twist_draw = uniform(rng, 0.0, 0.5);

  const bool centred = g.center_distance <= params.center_tol;
  const bool aligned = std::abs(g.axis_error) <= g.axis_tolerance;
  const bool height_ok = g.z_rel >= params.z_clearance && g.z_rel <= object.height - params.z_top_margin;
  if (g.enclosed && centred && aligned && height_ok) {
    const double p_slip = object.material.slip_proneness * instability_factor(params, g.center_distance);
    out.slip_occurred = slip_draw < p_slip;
    out.success = !out.slip_occurred;
  }

  if (g.touched) {
    const Vec2 u(std::cos(grasp.theta), std::sin(grasp.theta));
    const double mag = push_draw * std::min(params.displacement_cap, std::abs(g.axial_offset));
    const Vec2 d = -(g.axial_offset >= 0 ? 1.0 : -1.0) * mag * u;
    out.object_displacement.dx = d.x();
    out.object_displacement.dy = d.y();
    if (g.enclosed)
      out.object_displacement.dtheta = std::clamp(g.axis_error * twist_draw, -params.rotation_cap, params.rotation_cap);
  }
  return out;
}

GraspOutcome empty_grasp_outcome(const SimParams& params) {
  GraspOutcome out;
  out.enclosure_dof = params.f_max;
  return out;
}

ObjectInstance displace_object(const Workspace& workspace, const ObjectInstance& object, const Displacement& delta) {
  ObjectInstance moved = object;
  moved.pose.x += delta.dx;
  moved.pose.y += delta.dy;
  moved.pose.theta = wrap_angle(moved.pose.theta + delta.dtheta);
  Vec2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const Vec2& p : moved.world_polygon()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (lo.x() < workspace.x_extent.min) moved.pose.x += workspace.x_extent.min - lo.x();
  else if (hi.x() > workspace.x_extent.max) moved.pose.x -= hi.x() - workspace.x_extent.max;
  if (lo.y() < workspace.y_extent.min) moved.pose.y += workspace.y_extent.min - lo.y();
  else if (hi.y() > workspace.y_extent.max) moved.pose.y -= hi.y() - workspace.y_extent.max;
  return moved;
}

GraspPose clamp_grasp(const GraspPose& grasp, const Workspace& workspace) {
  GraspPose g = grasp;
  const Vec2 p = workspace.clamp({g.x, g.y});
  g.x = p.x();
  g.y = p.y();
  g.z = std::max(g.z, workspace.grasp_plane_z);
  g.theta = wrap_angle(g.theta);
  return g;
}

}  // namespace hg
