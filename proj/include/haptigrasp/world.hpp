#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "haptigrasp/geometry.hpp"
#include "haptigrasp/random.hpp"

namespace hg {

struct Interval {
  double min = 0.0;
  double max = 0.0;
  double width() const { return max - min; }
  double mid() const { return 0.5 * (min + max); }
  bool contains(double v) const { return v >= min && v <= max; }
};

struct Workspace {
  Interval x_extent{0.0, 0.6};
  Interval y_extent{0.0, 0.6};
  double grasp_plane_z = 0.0;

  bool contains(const Vec2& p) const { return x_extent.contains(p.x()) && y_extent.contains(p.y()); }
  Vec2 center() const { return {x_extent.mid(), y_extent.mid()}; }
  Vec2 clamp(const Vec2& p) const;
  void validate() const;
};

enum class Material { metal, hard_plastic, elastic_plastic, stuffed_fabric, wood, glass, ceramic };
inline constexpr int kNumMaterials = 7;
inline constexpr std::array<Material, kNumMaterials> kAllMaterials = {
    Material::metal, Material::hard_plastic, Material::elastic_plastic, Material::stuffed_fabric,
    Material::wood,  Material::glass,        Material::ceramic};

std::string_view to_string(Material m);
Material material_from_string(std::string_view s);

struct MaterialClass {
  Material label = Material::metal;
  double stiffness = 1.0;       // N/m
  double friction = 0.5;        // (0, 1]
  double slip_proneness = 0.0;  // [0, 1]
};

/// Fixed parameter triple for each label.
MaterialClass default_material(Material m);

enum class GripperMode { pinch, normal, wide };
inline constexpr int kNumModes = 3;
std::string_view to_string(GripperMode m);
GripperMode mode_from_string(std::string_view s);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Orientation (radians, undirected, object frame) at which an antipodal
/// grasp closes successfully, with its half-width tolerance.
struct GraspableAxis {
  double angle = 0.0;
  double tolerance = 0.2;
};

enum class Split { train, test };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

/// Object geometry as stored in a catalog. The polygon is given in the
/// object frame; it is re-centred on its area centroid at scene creation.
struct CatalogEntry {
  std::string id;
  Polygon polygon;
  double height = 0.06;
  Material material = Material::hard_plastic;
  std::vector<GraspableAxis> axes;  // empty: derived from the polygon
  Split split = Split::train;
};

struct RandomPolygonSpec {
  std::string id = "random";
  int n_vertices = 6;
  double min_radius = 0.025;
  double max_radius = 0.04;
  double height = 0.06;
  Material material = Material::hard_plastic;
};

using ObjectSpec = std::variant<CatalogEntry, RandomPolygonSpec>;

struct ObjectInstance {
  std::string id;
  Polygon polygon;  // object frame, CCW, centroid at origin
  Pose2 pose;
  MaterialClass material;
  std::vector<GraspableAxis> graspable_axes;
  double height = 0.06;

  Polygon world_polygon() const { return transform(polygon, pose.x, pose.y, pose.theta); }
  Vec2 centroid() const { return {pose.x, pose.y}; }
};

struct GraspPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double theta = 0.0;
  GripperMode mode = GripperMode::normal;
};

struct ContactResult {
  bool contact = false;
  std::optional<Vec2> contact_point;
  Segment swept_segment;
};

struct Displacement {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

struct GraspOutcome {
  bool success = false;
  double enclosure_dof = 1.0;
  Displacement object_displacement;
  bool slip_occurred = false;
};

/// Gripper and success-model constants.
struct SimParams {
  double aperture = 0.10;             // max finger opening, m
  double diameter_factor = 0.9;       // object diameter <= aperture * factor
  double f_max = 1.0;                 // enclosure DOF when fully closed
  double center_tol = 0.015;          // m
  double instability_base = 0.5;      // instability factor at zero offset
  double displacement_cap = 0.02;     // m
  double rotation_cap = 0.2;          // rad
  double z_clearance = 0.01;          // fingers below this height scrape the plane
  double z_top_margin = 0.005;        // fingers within this of the top slide off
  double placement_margin = 0.12;     // object centres kept this far from the walls
  std::array<double, kNumModes> finger_spread{0.008, 0.018, 0.028};  // lateral offset of side fingers
};

/// Per-finger contact geometry of a grasp. Fingers are ordered
/// left, middle, right; the middle finger closes from +u, the two side
/// fingers from -u at lateral offsets +spread (left) and -spread (right).
struct FingerContact {
  bool hits = false;       // the finger's closing line crosses the object
  double gap = 0.0;        // travel until contact, m
  double chord = 0.0;      // object chord along the closing line, m
};

struct GraspGeometry {
  std::array<FingerContact, 3> fingers;
  bool touched = false;         // at least one finger reaches the object
  bool enclosed = false;        // opposing fingers both reach it
  bool above_object = false;    // fingers pass over the top
  bool table_collision = false; // fingers scrape the grasp plane
  double axial_offset = 0.0;    // centroid offset along the closing axis u, m
  double lateral_offset = 0.0;  // centroid offset along v, m
  double center_distance = 0.0; // |centroid - grasp centre|, m
  double axis_error = 0.0;      // signed offset from the nearest graspable axis, rad
  double axis_tolerance = 0.0;  // tolerance of that axis
  double z_rel = 0.0;           // grasp height above the plane
  double enclosure_travel = 0.0; // finger travel at enclosure, m
};

struct Scene {
  Workspace workspace;
  ObjectInstance object;
};

/// Instability factor of a grasp at the given centroid offset; 1 at
/// center_tol, instability_base at zero.
double instability_factor(const SimParams& params, double center_distance);

/// Undirected graspable axes of a polygon: one per pair of nearly
/// antiparallel edges, else the minor principal axis.
std::vector<GraspableAxis> derive_axes(std::span<const Vec2> polygon, const MaterialClass& material);

Scene create_scene(std::uint64_t seed, const ObjectSpec& spec, const Workspace& workspace = {},
                   const SimParams& params = {});

ContactResult line_scan(const Workspace& workspace, const ObjectInstance& object, const Vec2& start,
                        const Vec2& direction, double max_len);

/// Free-space scan with nothing to hit (object removed from the scene).
ContactResult line_scan_empty(const Workspace& workspace, const Vec2& start, const Vec2& direction,
                              double max_len);

GraspGeometry grasp_geometry(const ObjectInstance& object, const GraspPose& grasp, const Workspace& workspace,
                             const SimParams& params);

/// Final gripper DOF of a grasp: f_max unless opposing fingers enclose the
/// object, in which case finger travel plus a stiffness-dependent squeeze.
double enclosure_dof(const GraspGeometry& geometry, const MaterialClass& material, const SimParams& params);

GraspOutcome execute_grasp(const Workspace& workspace, const ObjectInstance& object, const GraspPose& grasp,
                           const SimParams& params, Rng& rng);

/// Outcome of a grasp with nothing in the workspace.
GraspOutcome empty_grasp_outcome(const SimParams& params);

ObjectInstance displace_object(const Workspace& workspace, const ObjectInstance& object, const Displacement& delta);

/// Clamps (x, y) into the workspace, z to the plane or above, wraps theta.
GraspPose clamp_grasp(const GraspPose& grasp, const Workspace& workspace);

}  // namespace hg
