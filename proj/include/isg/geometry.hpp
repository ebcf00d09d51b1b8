#pragma once

#include <optional>
#include <span>
#include <vector>

#include "isg/types.hpp"

namespace isg {

/// Up direction (inverse gravity). Horizontal quantities are measured in the
/// plane orthogonal to `up`.
struct GravityConfig {
  Vec3 up = Vec3::UnitZ();

  /// Throws InvalidArgument unless |up| == 1 within 1e-9.
  void validate() const;

  /// Deterministic horizontal basis (e1, e2) with e1 x e2 = up.
  /// e1 is world +X projected onto the horizontal plane (world +Y if +X is vertical).
  std::pair<Vec3, Vec3> horizontal_basis() const;
};

/// Gravity-aligned box. dims = (extent along the yaw axis, extent along the
/// perpendicular horizontal axis, vertical extent). yaw in [0, pi/2) measured
/// from GravityConfig::horizontal_basis().first towards .second.
struct Obb {
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();
  double yaw = 0.0;

  double volume() const { return dims.prod(); }
  double horizontal_area() const { return dims.x() * dims.y(); }
  /// True when `p` lies inside the box inflated by `slack` on every face.
  bool contains(const Vec3& p, const GravityConfig& gravity, double slack = 0.0) const;
  /// The eight corners in world coordinates.
  std::vector<Vec3> corners(const GravityConfig& gravity) const;
};

struct OutlierConfig {
  int mean_k = 16;
  double std_ratio = 2.0;
};

/// Statistical outlier removal: drops points whose mean distance to their
/// `mean_k` nearest neighbours exceeds mean + std_ratio * stddev over the set
/// (sample standard deviation). Sets with at most `mean_k` points are returned
/// unchanged. Output keeps input order.
std::vector<Vec3> remove_outliers(std::span<const Vec3> points, const OutlierConfig& cfg = {});

/// Same filter returning the indices of the kept points.
std::vector<std::size_t> outlier_inliers(std::span<const Vec3> points, const OutlierConfig& cfg = {});

/// Minimum-volume gravity-aligned box: minimum-area rectangle of the
/// horizontal projection (convex hull + per-edge caliper sweep), extruded over
/// the vertical extent. Throws DegenerateGeometry for fewer than 3 points or a
/// colinear projection.
Obb fit_obb(std::span<const Vec3> points, const GravityConfig& gravity = {});

/// True iff the two boxes, with every extent grown by 2 * margin, overlap.
/// Touching counts as overlap.
bool obb_collide(const Obb& a, const Obb& b, double margin, const GravityConfig& gravity = {});

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  int px() const { return static_cast<int>(u); }
  int py() const { return static_cast<int>(v); }
};

/// Pinhole projection; nullopt when behind the camera or outside [0,w) x [0,h).
std::optional<Projection> project(const Vec3& point, const RigidPose& pose, const CameraIntrinsics& K);

/// Geodesic angle between two rotations, radians.
double rotation_angle(const Mat3& a, const Mat3& b);

// 2D helpers exposed for tests.
namespace planar {

using Vec2 = Eigen::Vector2d;

/// Andrew's monotone chain; counter-clockwise, no repeated or colinear vertices.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

struct Rect {
  Vec2 center = Vec2::Zero();
  double extent_u = 0.0;  // along (cos yaw, sin yaw)
  double extent_v = 0.0;  // along (-sin yaw, cos yaw)
  double yaw = 0.0;       // [0, pi/2)
  double area() const { return extent_u * extent_v; }
};

/// Minimum-area enclosing rectangle of a convex polygon (>= 3 vertices).
Rect min_area_rect(const std::vector<Vec2>& hull);

/// Bounding rectangle of `pts` with axes at `yaw`.
Rect rect_at_yaw(std::span<const Vec2> pts, double yaw);

}  // namespace planar

}  // namespace isg
