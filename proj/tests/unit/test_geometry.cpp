#include <doctest.h>

#include <numbers>

#include "isg/geometry.hpp"
#include "isg/rng.hpp"
#include "oracles.hpp"

using namespace isg;

namespace {

std::vector<Vec3> random_cloud(Rng& rng, int n, double spread = 1.0) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i)
    pts.emplace_back(rng.uniform(-spread, spread), rng.uniform(-spread * 0.5, spread * 0.5), rng.uniform(0, 1));
  return pts;
}

// mean distance to the k nearest others, by sorting all distances
std::vector<std::size_t> naive_inliers(const std::vector<Vec3>& pts, int k, double ratio) {
  const std::size_t n = pts.size();
  if (n <= static_cast<std::size_t>(k)) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::vector<double> md(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    std::sort(d.begin(), d.end());
    double s = 0;
    for (int q = 0; q < k; ++q) s += d[q];
    md[i] = s / k;
  }
  double mean = 0;
  for (double v : md) mean += v;
  mean /= n;
  double var = 0;
  for (double v : md) var += (v - mean) * (v - mean);
  var /= (n - 1);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (md[i] <= mean + ratio * std::sqrt(var)) keep.push_back(i);
  return keep;
}

}  // namespace

TEST_CASE("outliers: far point is dropped from a grid") {
  std::vector<Vec3> pts;
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y) pts.emplace_back(x, y, 0);
  pts.emplace_back(100, 100, 100);
  const OutlierConfig cfg{8, 2.0};
  const auto kept = remove_outliers(pts, cfg);
  CHECK(kept.size() == 100);
  for (const auto& p : kept) CHECK(p.z() == 0.0);
  CHECK(outlier_inliers(pts, cfg) == naive_inliers(pts, 8, 2.0));
}

TEST_CASE("outliers: matches the naive neighbour oracle on random clouds") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = random_cloud(rng, 40 + trial);
    pts.emplace_back(rng.uniform(3, 5), 0, 0);
    CHECK(outlier_inliers(pts, {6, 1.5}) == naive_inliers(pts, 6, 1.5));
  }
}

TEST_CASE("outliers: small and constant sets") {
  std::vector<Vec3> few{{0, 0, 0}, {1, 0, 0}, {50, 0, 0}};
  CHECK(remove_outliers(few, {3, 2.0}) == few);
  std::vector<Vec3> same(30, Vec3(1, 2, 3));
  CHECK(remove_outliers(same, {8, 2.0}).size() == 30);
  CHECK_THROWS_AS(remove_outliers(std::vector<Vec3>{}), EmptyPointSet);
}

TEST_CASE("outliers: output is a subset") {
  Rng rng(5);
  auto pts = random_cloud(rng, 80);
  pts.emplace_back(9, 9, 9);
  const auto once = remove_outliers(pts, {8, 2.0});
  for (const auto& p : once) CHECK(std::find(pts.begin(), pts.end(), p) != pts.end());
  CHECK(once.size() < pts.size());
}

TEST_CASE("fit_obb: unit cube") {
  std::vector<Vec3> cube;
  for (int i = 0; i < 8; ++i) cube.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const Obb b = fit_obb(cube);
  CHECK((b.center - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
  CHECK((b.dims - Vec3(1, 1, 1)).norm() < 1e-12);
  CHECK(b.yaw == 0.0);
}

TEST_CASE("fit_obb: rotated square gives yaw pi/6") {
  const double a = std::numbers::pi / 6;
  std::vector<Vec3> pts;
  for (int i = 0; i < 4; ++i) {
    const Vec3 c((i & 1) - 0.5, ((i >> 1) & 1) - 0.5, 0.0);
    pts.push_back(oracle::rotate_z(c, a));
    pts.push_back(oracle::rotate_z(c, a) + Vec3(0, 0, 0.3));
  }
  const Obb b = fit_obb(pts);
  CHECK(std::abs(b.yaw - a) < 1e-6);
  CHECK(std::abs(b.dims.x() - 1) < 1e-9);
  CHECK(std::abs(b.dims.y() - 1) < 1e-9);
  CHECK(std::abs(b.dims.z() - 0.3) < 1e-12);
  // the sweep oracle finds the same optimum
  CHECK(oracle::swept_min_area(pts) >= b.horizontal_area() - 1e-9);
}

TEST_CASE("fit_obb: contains its points and is no larger than the swept minimum") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = random_cloud(rng, 50, 2.0);
    const Obb b = fit_obb(pts);
    for (const auto& p : pts) CHECK(b.contains(p, GravityConfig{}, 1e-9));
    CHECK(b.horizontal_area() <= oracle::swept_min_area(pts, 0.05) + 1e-9);
    CHECK(b.yaw >= 0.0);
    CHECK(b.yaw < std::numbers::pi / 2);
  }
}

TEST_CASE("fit_obb: degenerate input") {
  CHECK_THROWS_AS(fit_obb(std::vector<Vec3>{{0, 0, 0}, {1, 1, 1}}), DegenerateGeometry);
  CHECK_THROWS_AS(fit_obb(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {2, 0, 5}}), DegenerateGeometry);
  CHECK_THROWS_AS(fit_obb(std::vector<Vec3>{{0, 0, 0}, {0, 0, 1}, {0, 0, 2}}), DegenerateGeometry);
}

TEST_CASE("fit_obb: non-default gravity") {
  GravityConfig g;
  g.up = Vec3(0, 1, 0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(2.0 * (i & 1), 3.0 * ((i >> 1) & 1), 0.5 * ((i >> 2) & 1));
  const Obb b = fit_obb(pts, g);
  CHECK(std::abs(b.dims.z() - 3.0) < 1e-12);
  CHECK(std::abs(b.horizontal_area() - 1.0) < 1e-9);
  for (const auto& p : pts) CHECK(b.contains(p, g, 1e-9));
}

TEST_CASE("obb_collide: margin arithmetic") {
  Obb a, b;
  a.center = Vec3(0, 0, 0);
  b.center = Vec3(1.4, 0, 0);
  CHECK(obb_collide(a, a, 0.0));
  CHECK(obb_collide(a, b, 0.5));
  CHECK_FALSE(obb_collide(a, b, 0.1));
  b.center = Vec3(0, 0, 1.5);
  CHECK(obb_collide(a, b, 0.3));
  CHECK_FALSE(obb_collide(a, b, 0.2));
}

TEST_CASE("obb_collide: symmetric on random boxes") {
  Rng rng(21);
  int hits = 0;
  for (int k = 0; k < 500; ++k) {
    Obb a, b;
    a.center = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1));
    b.center = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1));
    a.dims = Vec3(rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2));
    b.dims = Vec3(rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2));
    a.yaw = rng.uniform(0, std::numbers::pi / 2);
    b.yaw = rng.uniform(0, std::numbers::pi / 2);
    const double m = rng.uniform(0, 0.5);
    CHECK(obb_collide(a, b, m) == obb_collide(b, a, m));
    hits += obb_collide(a, b, m);
    // a corner of one box inside the other implies overlap
    bool corner_inside = false;
    for (const auto& c : a.corners(GravityConfig{})) corner_inside = corner_inside || b.contains(c, GravityConfig{});
    if (corner_inside) CHECK(obb_collide(a, b, 0.0));
  }
  CHECK(hits > 0);
  CHECK(hits < 500);
}

TEST_CASE("project: pinhole rules") {
  const CameraIntrinsics K{100, 100, 32, 24, 64, 48};
  const RigidPose id;
  const auto p = project(Vec3(0, 0, 2), id, K);
  REQUIRE(p);
  CHECK(p->u == 32.0);
  CHECK(p->v == 24.0);
  CHECK(p->depth == 2.0);
  CHECK_FALSE(project(Vec3(0, 0, -1), id, K));
  // u = 64 exactly is outside
  CHECK_FALSE(project(Vec3(0.64, 0, 2), id, K));
  CHECK(project(Vec3(0.6399, 0, 2), id, K));
}

TEST_CASE("pose and intrinsics validation") {
  RigidPose bad;
  bad.rotation(0, 0) = 1.1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CameraIntrinsics K;
  K.fx = 0;
  CHECK_THROWS_AS(K.validate(), InvalidArgument);
  GravityConfig g;
  g.up = Vec3(0, 0, 2);
  CHECK_THROWS_AS(g.validate(), InvalidArgument);
}

TEST_CASE("convex hull drops interior and colinear points") {
  using planar::Vec2;
  const auto h = planar::convex_hull({{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 1}});
  CHECK(h.size() == 4);
}
