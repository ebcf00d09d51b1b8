#include "isg/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "isg/kdtree.hpp"

namespace isg {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
// Vertical extent floor so that flat patches (floors, walls seen edge-on)
// still yield boxes with strictly positive dims.
constexpr double kMinExtent = 1e-6;

double canonical_yaw(double angle) {
  double yaw = std::fmod(angle, kHalfPi);
  if (yaw < 0) yaw += kHalfPi;
  if (kHalfPi - yaw < 1e-12) yaw = 0.0;
  return yaw;
}

}  // namespace

void RigidPose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) throw InvalidArgument("pose has non-finite entries");
  const double err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-6) throw InvalidArgument("pose rotation is not orthonormal");
  if (rotation.determinant() < 0) throw InvalidArgument("pose rotation is a reflection");
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
}

void GravityConfig::validate() const {
  if (!up.allFinite() || std::abs(up.norm() - 1.0) > 1e-9) throw InvalidArgument("gravity up vector must be unit length");
}

std::pair<Vec3, Vec3> GravityConfig::horizontal_basis() const {
  Vec3 e1 = Vec3::UnitX() - Vec3::UnitX().dot(up) * up;
  if (e1.norm() < 1e-6) e1 = Vec3::UnitY() - Vec3::UnitY().dot(up) * up;
  e1.normalize();
  Vec3 e2 = up.cross(e1);
  return {e1, e2};
}

bool Obb::contains(const Vec3& p, const GravityConfig& gravity, double slack) const {
  const auto [e1, e2] = gravity.horizontal_basis();
  const Vec3 d = p - center;
  const double x = d.dot(e1), y = d.dot(e2), z = d.dot(gravity.up);
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double lu = c * x + s * y;
  const double lv = -s * x + c * y;
  return std::abs(lu) <= dims.x() / 2 + slack && std::abs(lv) <= dims.y() / 2 + slack &&
         std::abs(z) <= dims.z() / 2 + slack;
}

std::vector<Vec3> Obb::corners(const GravityConfig& gravity) const {
  const auto [e1, e2] = gravity.horizontal_basis();
  const Vec3 u = std::cos(yaw) * e1 + std::sin(yaw) * e2;
  const Vec3 v = -std::sin(yaw) * e1 + std::cos(yaw) * e2;
  std::vector<Vec3> out;
  out.reserve(8);
  for (int i = 0; i < 8; ++i) {
    const double su = (i & 1) ? 0.5 : -0.5;
    const double sv = (i & 2) ? 0.5 : -0.5;
    const double sz = (i & 4) ? 0.5 : -0.5;
    out.push_back(center + su * dims.x() * u + sv * dims.y() * v + sz * dims.z() * gravity.up);
  }
  return out;
}

std::vector<std::size_t> outlier_inliers(std::span<const Vec3> points, const OutlierConfig& cfg) {
  if (points.empty()) throw EmptyPointSet("remove_outliers: empty point set");
  if (cfg.mean_k < 1) throw InvalidArgument("remove_outliers: mean_k must be >= 1");
  std::vector<std::size_t> kept(points.size());
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
  const auto k = static_cast<std::size_t>(cfg.mean_k);
  if (points.size() <= k) return kept;

  const KdTree3 tree(points);
  std::vector<double> mean_dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto nn = tree.knn(points[i], k + 1);
    // Drop the query itself; if duplicates pushed it out, drop one zero-distance entry.
    auto self = std::find_if(nn.begin(), nn.end(), [i](const auto& n) { return n.index == i; });
    nn.erase(self != nn.end() ? self : nn.begin());
    double sum = 0.0;
    for (const auto& n : nn) sum += std::sqrt(n.sq_dist);
    mean_dist[i] = sum / static_cast<double>(nn.size());
  }

  double sum = 0.0, sq_sum = 0.0;
  for (double d : mean_dist) {
    sum += d;
    sq_sum += d * d;
  }
  const double n = static_cast<double>(mean_dist.size());
  const double mean = sum / n;
  const double variance = std::max(0.0, (sq_sum - sum * sum / n) / (n - 1.0));
  const double threshold = mean + cfg.std_ratio * std::sqrt(variance);

  kept.clear();
  for (std::size_t i = 0; i < points.size(); ++i)
    if (mean_dist[i] <= threshold) kept.push_back(i);
  return kept;
}

std::vector<Vec3> remove_outliers(std::span<const Vec3> points, const OutlierConfig& cfg) {
  std::vector<Vec3> out;
  for (std::size_t i : outlier_inliers(points, cfg)) out.push_back(points[i]);
  return out;
}

namespace planar {

namespace {
double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}
}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Rect rect_at_yaw(std::span<const Vec2> pts, double yaw) {
  const Vec2 u(std::cos(yaw), std::sin(yaw));
  const Vec2 v(-u.y(), u.x());
  double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
  for (const auto& p : pts) {
    const double pu = p.dot(u), pv = p.dot(v);
    umin = std::min(umin, pu);
    umax = std::max(umax, pu);
    vmin = std::min(vmin, pv);
    vmax = std::max(vmax, pv);
  }
  Rect r;
  r.yaw = yaw;
  r.extent_u = umax - umin;
  r.extent_v = vmax - vmin;
  r.center = u * (umin + umax) / 2 + v * (vmin + vmax) / 2;
  return r;
}

// The optimal rectangle has one side flush with a hull edge, so it suffices
// to evaluate each edge direction.
Rect min_area_rect(const std::vector<Vec2>& hull) {
  if (hull.size() < 3) throw DegenerateGeometry("min_area_rect: need a polygon with >= 3 vertices");
  Rect best;
  double best_area = INFINITY;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 edge = hull[(i + 1) % hull.size()] - hull[i];
    const double yaw = canonical_yaw(std::atan2(edge.y(), edge.x()));
    const Rect r = rect_at_yaw(hull, yaw);
    const double area = r.area();
    if (i == 0) {
      best = r;
      best_area = area;
      continue;
    }
    const double tol = 1e-12 * std::max(1.0, best_area);
    if (area < best_area - tol || (std::abs(area - best_area) <= tol && yaw < best.yaw)) {
      best = r;
      best_area = area;
    }
  }
  return best;
}

}  // namespace planar

Obb fit_obb(std::span<const Vec3> points, const GravityConfig& gravity) {
  gravity.validate();
  if (points.size() < 3) throw DegenerateGeometry("fit_obb: need at least 3 points");
  const auto [e1, e2] = gravity.horizontal_basis();

  std::vector<planar::Vec2> flat;
  flat.reserve(points.size());
  double hmin = INFINITY, hmax = -INFINITY;
  for (const auto& p : points) {
    flat.emplace_back(p.dot(e1), p.dot(e2));
    const double h = p.dot(gravity.up);
    hmin = std::min(hmin, h);
    hmax = std::max(hmax, h);
  }
  const auto hull = planar::convex_hull(std::move(flat));
  if (hull.size() < 3) throw DegenerateGeometry("fit_obb: horizontal projection is colinear");
  const planar::Rect rect = planar::min_area_rect(hull);
  if (!(rect.area() > 0)) throw DegenerateGeometry("fit_obb: horizontal projection has zero area");

  Obb box;
  box.yaw = rect.yaw;
  box.dims = Vec3(std::max(rect.extent_u, kMinExtent), std::max(rect.extent_v, kMinExtent),
                  std::max(hmax - hmin, kMinExtent));
  box.center = rect.center.x() * e1 + rect.center.y() * e2 + 0.5 * (hmin + hmax) * gravity.up;
  return box;
}

bool obb_collide(const Obb& a, const Obb& b, double margin, const GravityConfig& gravity) {
  const auto [e1, e2] = gravity.horizontal_basis();
  const Vec3 d3 = b.center - a.center;
  if (std::abs(d3.dot(gravity.up)) > a.dims.z() / 2 + b.dims.z() / 2 + 2 * margin) return false;

  using planar::Vec2;
  const Vec2 d(d3.dot(e1), d3.dot(e2));
  const std::array<Vec2, 2> axes_a{Vec2(std::cos(a.yaw), std::sin(a.yaw)), Vec2(-std::sin(a.yaw), std::cos(a.yaw))};
  const std::array<Vec2, 2> axes_b{Vec2(std::cos(b.yaw), std::sin(b.yaw)), Vec2(-std::sin(b.yaw), std::cos(b.yaw))};
  const Vec2 half_a(a.dims.x() / 2 + margin, a.dims.y() / 2 + margin);
  const Vec2 half_b(b.dims.x() / 2 + margin, b.dims.y() / 2 + margin);

  auto separated = [&](const Vec2& axis) {
    const double ra = half_a.x() * std::abs(axes_a[0].dot(axis)) + half_a.y() * std::abs(axes_a[1].dot(axis));
    const double rb = half_b.x() * std::abs(axes_b[0].dot(axis)) + half_b.y() * std::abs(axes_b[1].dot(axis));
    return std::abs(d.dot(axis)) > ra + rb;
  };
  for (const auto& axis : axes_a)
    if (separated(axis)) return false;
  for (const auto& axis : axes_b)
    if (separated(axis)) return false;
  return true;
}

std::optional<Projection> project(const Vec3& point, const RigidPose& pose, const CameraIntrinsics& K) {
  const Vec3 pc = pose.to_camera(point);
  if (!(pc.z() > 0)) return std::nullopt;
  const double u = K.fx * pc.x() / pc.z() + K.cx;
  const double v = K.fy * pc.y() / pc.z() + K.cy;
  if (!(u >= 0 && u < K.width && v >= 0 && v < K.height)) return std::nullopt;
  return Projection{u, v, pc.z()};
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace isg
